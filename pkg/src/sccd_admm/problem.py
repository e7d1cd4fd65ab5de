"""Synthetic sparse logistic-regression problems and their reference solutions.

A problem instance is a set of per-node sample matrices plus one shared true
weight vector. Labels come from noisy signed margins. Two regularizer
scenarios are supported:

* ``l2``: lam * ||x||_2 (not squared), feature columns and the true weights
  each carry 50 nonzeros with Gaussian entries of variance 5;
* ``l1``: lam * ||x||_1 with a box constraint |x_e| <= a, 10 nonzeros with
  uniform [-1, 1] entries.

Samples are drawn pooled-first: the same seed and total sample count yield
the same global data for any node count, so experiments that vary the
network size can share one centralized problem.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .solvers import fista_box_l1, minimize_l2_composite, soft_threshold

__all__ = [
    "RegularizerSpec",
    "Dataset",
    "LogisticObjective",
    "softplus",
    "sigmoid",
    "make_labels",
    "synthesize",
    "node_objectives",
    "pooled_objective",
    "local_smooth_value",
    "local_smooth_gradient",
    "regularizer_value",
    "prox_or_subgrad",
    "consensus_objective_value",
    "centralized_reference",
    "save_dataset",
    "load_dataset",
    "dataset_hash",
]

# default generation knobs per scenario
_NNZ = {"l2": 50, "l1": 10}
_DEFAULT_NOISE_STD = math.sqrt(0.1)  # label noise variance 0.1
_L2_ENTRY_STD = math.sqrt(5.0)  # feature/weight entry variance 5


def softplus(t: np.ndarray) -> np.ndarray:
    """log(1 + exp(t)), switching to t + log1p(exp(-t)) above t = 30."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    hi = t > 30.0
    if hi.any():
        th = t[hi]
        out[hi] = th + np.log1p(np.exp(-th))
        lo = ~hi
        out[lo] = np.log1p(np.exp(t[lo]))
    else:
        np.log1p(np.exp(t), out=out)
    return out


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Logistic function, evaluated without overflow on either tail."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    neg = t < 0.0
    if neg.any():
        e = np.exp(t[neg])
        out[neg] = e / (1.0 + e)
        pos = ~neg
        out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    else:
        out[...] = 1.0 / (1.0 + np.exp(-t))
    return out


def make_labels(margins: np.ndarray) -> np.ndarray:
    """0/1 labels from signed margins: strictly positive -> 1, else 0."""
    return (np.asarray(margins, dtype=float) > 0.0).astype(float)


@dataclass(frozen=True)
class RegularizerSpec:
    """Regularizer kind, weight and (for l1) the box half-width."""

    kind: str
    lam: float
    box_bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("l1", "l2"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.kind == "l1":
            if self.box_bound is None or self.box_bound <= 0.0:
                raise ValueError("l1 regularizer needs a positive box_bound")
        elif self.box_bound is not None:
            raise ValueError("box_bound only applies to the l1 scenario")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Per-node samples, labels, recorded label noise and the true weights."""

    features: tuple[np.ndarray, ...]  # node i: (dim, m_i), float64
    labels: tuple[np.ndarray, ...]  # node i: (m_i,), values in {0.0, 1.0}
    noise: tuple[np.ndarray, ...]  # node i: (m_i,) label noise draws
    x_true: np.ndarray
    scenario: str
    reg: RegularizerSpec

    def __post_init__(self):
        if not (len(self.features) == len(self.labels) == len(self.noise)):
            raise ValueError("per-node field lengths disagree")
        dim = self.x_true.shape[0]
        for i, (feats, labs) in enumerate(zip(self.features, self.labels)):
            if feats.shape[0] != dim or feats.shape[1] != labs.shape[0]:
                raise ValueError(f"shape mismatch at node {i}")
            if not np.isin(labs, (0.0, 1.0)).all():
                raise ValueError(f"labels of node {i} are not 0/1")

    @property
    def n_nodes(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return int(self.x_true.shape[0])


class LogisticObjective:
    """Smooth local loss sum_j [softplus(x . A_j) - b_j * (x . A_j)]."""

    __slots__ = ("features", "labels", "_lip")

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        self.features = np.ascontiguousarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self._lip = None

    def value(self, x: np.ndarray) -> float:
        t = self.features.T @ x
        return float(np.sum(softplus(t) - self.labels * t))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        t = self.features.T @ x
        return self.features @ (sigmoid(t) - self.labels)

    def value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        t = self.features.T @ x
        val = float(np.sum(softplus(t) - self.labels * t))
        return val, self.features @ (sigmoid(t) - self.labels)

    def lipschitz_upper(self) -> float:
        """Upper bound on the Hessian spectral norm: 0.25 * lam_max(A A^T)."""
        if self._lip is None:
            gram = self.features.T @ self.features
            lam = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
            self._lip = 0.25 * lam
        return self._lip


def synthesize(
    n: int,
    dim: int,
    samples_per_node: int,
    scenario: str,
    seed: int,
    lam: float = 0.4,
    noise_std: float = _DEFAULT_NOISE_STD,
    box_bound: float = 1.0,
) -> Dataset:
    """Generate an n-node problem instance.

    Feature columns and the true weight vector are sparse (50 nonzeros for
    ``l2``, 10 for ``l1``, capped at ``dim``); support positions are drawn
    uniformly without replacement. Labels are ``margin > 0`` indicators of
    the noisy margins, and the noise draws are stored for replay. All draws
    happen on the pooled sample axis before slicing per node.
    """
    if scenario not in _NNZ:
        raise ValueError(f"unknown scenario {scenario!r}")
    if n < 1 or dim < 1 or samples_per_node < 1:
        raise ValueError("n, dim and samples_per_node must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    nnz = min(_NNZ[scenario], dim)
    total = n * samples_per_node

    def draw(size: int) -> np.ndarray:
        if scenario == "l2":
            return rng.normal(0.0, _L2_ENTRY_STD, size)
        return rng.uniform(-1.0, 1.0, size)

    x_true = np.zeros(dim)
    x_true[rng.choice(dim, size=nnz, replace=False)] = draw(nnz)

    pooled = np.zeros((dim, total))
    for s in range(total):
        support = rng.choice(dim, size=nnz, replace=False)
        pooled[support, s] = draw(nnz)

    noise = rng.normal(0.0, noise_std, total)
    labels = make_labels(pooled.T @ x_true + noise)

    reg = RegularizerSpec(
        kind=scenario,
        lam=lam,
        box_bound=box_bound if scenario == "l1" else None,
    )
    m = samples_per_node
    return Dataset(
        features=tuple(
            np.ascontiguousarray(pooled[:, i * m : (i + 1) * m]) for i in range(n)
        ),
        labels=tuple(labels[i * m : (i + 1) * m].copy() for i in range(n)),
        noise=tuple(noise[i * m : (i + 1) * m].copy() for i in range(n)),
        x_true=x_true,
        scenario=scenario,
        reg=reg,
    )


def node_objectives(dataset: Dataset) -> tuple[LogisticObjective, ...]:
    """One smooth local objective per node."""
    return tuple(
        LogisticObjective(f, b) for f, b in zip(dataset.features, dataset.labels)
    )


def pooled_objective(dataset: Dataset) -> LogisticObjective:
    """Smooth loss over all nodes' samples concatenated."""
    return LogisticObjective(
        np.concatenate(dataset.features, axis=1),
        np.concatenate(dataset.labels),
    )


def local_smooth_value(dataset: Dataset, i: int, x: np.ndarray) -> float:
    """Value of node i's smooth loss at x."""
    return LogisticObjective(dataset.features[i], dataset.labels[i]).value(x)


def local_smooth_gradient(dataset: Dataset, i: int, x: np.ndarray) -> np.ndarray:
    """Gradient of node i's smooth loss at x."""
    return LogisticObjective(dataset.features[i], dataset.labels[i]).gradient(x)


def regularizer_value(x: np.ndarray, reg: RegularizerSpec) -> float:
    """lam * ||x||_2 or lam * ||x||_1 (box indicator not included)."""
    if reg.kind == "l2":
        return reg.lam * float(np.linalg.norm(x))
    return reg.lam * float(np.abs(x).sum())


def prox_or_subgrad(x: np.ndarray, reg: RegularizerSpec, step: float) -> np.ndarray:
    """Regularizer handle used by the inner solvers.

    For ``l2`` this is the minimal-norm subgradient of lam * ||x||_2
    (lam * x / ||x||, and 0 at the origin); ``step`` is ignored. For ``l1``
    it is the proximal map at threshold ``step``: elementwise shrinkage
    followed by clamping to the box.
    """
    x = np.asarray(x, dtype=float)
    if reg.kind == "l2":
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            return np.zeros_like(x)
        return (reg.lam / norm) * x
    out = soft_threshold(x, step)
    np.clip(out, -reg.box_bound, reg.box_bound, out=out)
    return out


def consensus_objective_value(
    dataset: Dataset, x: np.ndarray, pooled: LogisticObjective | None = None
) -> float:
    """Global objective at a consensus point: pooled smooth loss plus
    ``n_nodes * lam * r(x)``."""
    if pooled is None:
        pooled = pooled_objective(dataset)
    return pooled.value(x) + dataset.n_nodes * regularizer_value(x, dataset.reg)


def centralized_reference(
    dataset: Dataset,
    tol_l2: float = 1e-8,
    prg_tol_l1: float = 1e-6,
    max_iters: int = 300_000,
) -> tuple[np.ndarray, float]:
    """Solve the pooled problem and return (x_star, obj_star).

    ``l2``: descent on pooled smooth loss + n * lam * ||x||_2 until the
    (sub)gradient norm drops below ``tol_l2``. ``l1``: accelerated proximal
    gradient over the box until the progress residual drops below
    ``prg_tol_l1``; the step is set from the pooled Lipschitz bound so the
    fixed-step iteration is stable for any instance.
    """
    pooled = pooled_objective(dataset)
    n, reg = dataset.n_nodes, dataset.reg
    x0 = np.zeros(dataset.dim)
    if reg.kind == "l2":
        x_star, _ = minimize_l2_composite(
            pooled.value_and_gradient,
            x0,
            l2_lam=n * reg.lam,
            tol=tol_l2,
            max_iters=max_iters,
        )
    else:
        rho = 0.9 / max(pooled.lipschitz_upper(), 1e-12)
        x_star, _ = fista_box_l1(
            pooled.gradient,
            x0,
            rho=rho,
            l1_threshold=rho * n * reg.lam,
            box_bound=reg.box_bound,
            prg_tol=prg_tol_l1,
            max_iters=max_iters,
        )
    return x_star, consensus_objective_value(dataset, x_star, pooled)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as an .npz container (row-major float64 arrays).

    Keys: ``scenario``, ``lam``, ``box_bound`` (nan when absent), ``x_true``
    and per node ``features_<i>``, ``labels_<i>``, ``noise_<i>``.
    """
    payload = {
        "scenario": np.array(dataset.scenario),
        "lam": np.array(dataset.reg.lam),
        "box_bound": np.array(
            np.nan if dataset.reg.box_bound is None else dataset.reg.box_bound
        ),
        "x_true": dataset.x_true,
    }
    for i in range(dataset.n_nodes):
        payload[f"features_{i:04d}"] = dataset.features[i]
        payload[f"labels_{i:04d}"] = dataset.labels[i]
        payload[f"noise_{i:04d}"] = dataset.noise[i]
    np.savez(path, **payload)


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    with np.load(path) as npz:
        scenario = str(npz["scenario"])
        lam = float(npz["lam"])
        box = float(npz["box_bound"])
        x_true = np.asarray(npz["x_true"], dtype=float)
        feats, labs, noise = [], [], []
        i = 0
        while f"features_{i:04d}" in npz:
            feats.append(np.asarray(npz[f"features_{i:04d}"], dtype=float))
            labs.append(np.asarray(npz[f"labels_{i:04d}"], dtype=float))
            noise.append(np.asarray(npz[f"noise_{i:04d}"], dtype=float))
            i += 1
    reg = RegularizerSpec(
        kind=scenario, lam=lam, box_bound=None if math.isnan(box) else box
    )
    return Dataset(
        features=tuple(feats),
        labels=tuple(labs),
        noise=tuple(noise),
        x_true=x_true,
        scenario=scenario,
        reg=reg,
    )


def dataset_hash(dataset: Dataset) -> str:
    """Content hash identifying the optimization problem (data + regularizer)."""
    h = hashlib.sha256()
    h.update(dataset.scenario.encode())
    h.update(repr((dataset.reg.lam, dataset.reg.box_bound)).encode())
    h.update(repr(dataset.x_true.shape).encode())
    h.update(np.ascontiguousarray(dataset.x_true).tobytes())
    for feats, labs in zip(dataset.features, dataset.labels):
        h.update(repr(feats.shape).encode())
        h.update(np.ascontiguousarray(feats).tobytes())
        h.update(np.ascontiguousarray(labs).tobytes())
    return h.hexdigest()
