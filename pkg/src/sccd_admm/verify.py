"""Property suites behind the ``verify`` subcommand.

Four algebraic/statistical suites (estimator unbiasedness by exact
enumeration, optimality of the distance-proportional weights, the sampled
x-update error against its closed-form variance bound, and numerical
hygiene for gradients, proximal maps, weight normalization and the largest
Laplacian eigenvalue). Each check returns a record with the measured margin
so failures are diagnosable from the printed report alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .adapt import sampling_weights, select_nodes, variance_bound
from .engine import (
    RunConfig,
    eta_schedule,
    grad_h_full,
    grad_h_sampled,
    init_states,
    p_update_full,
    run_round,
    x_update_sccd_l2,
)
from .problem import node_objectives, prox_or_subgrad, synthesize
from .solvers import soft_threshold
from .topology import (
    Graph,
    generate_erdos_renyi,
    laplacian,
    laplacian_lambda_max,
    neighbors,
)

__all__ = [
    "run_all",
    "check_estimator_unbiased",
    "check_weights_optimal",
    "check_variance_bound_mc",
    "check_gradient_fd",
    "check_prox_nonexpansive",
    "check_weight_normalization",
    "check_lambda_max",
    "update_error_bound_mc",
    "enumerated_estimator_bias",
    "project_simplex",
]


def _record(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# ---------------------------------------------------------------------------
# estimator unbiasedness (exact enumeration)


def enumerated_estimator_bias(
    x_i: np.ndarray, neighbor_values: np.ndarray, c: float, num: int
) -> float:
    """Max-abs gap between the enumerated mean of the sampled dual step and
    the full-sum dual step. Draws with zero probability contribute nothing
    and are skipped (their disagreement is zero by construction)."""
    weights = sampling_weights(x_i, neighbor_values)
    probs = weights.probs
    support = [j for j in range(len(probs)) if probs[j] > 0.0]
    expected = np.zeros_like(x_i)
    for combo in itertools.product(support, repeat=num):
        mass = math.prod(probs[j] for j in combo)
        inc = np.zeros_like(x_i)
        for j in combo:
            inc += (x_i - neighbor_values[j]) / probs[j]
        expected += mass * (c / num) * inc
    full = p_update_full(x_i, np.zeros_like(x_i), neighbor_values, c)
    return float(np.max(np.abs(expected - full)))


def check_estimator_unbiased(seed: int, trials: int = 40, tol: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        deg = int(rng.integers(1, 6))
        dim = int(rng.integers(1, 5))
        x_i = rng.normal(size=dim)
        values = rng.normal(size=(deg, dim))
        if t % 5 == 0 and deg > 1:
            values[0] = x_i  # zero-distance neighbor must not bias the mean
        for num in (1, 2):
            worst = max(worst, enumerated_estimator_bias(x_i, values, 0.7, num))
    return _record(
        "estimator_unbiased",
        worst <= tol,
        f"max enumeration bias {worst:.3e} over {trials} graphs (tol {tol:g})",
    )


# ---------------------------------------------------------------------------
# weight optimality


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _weighted_second_moment(sq_norms: np.ndarray, w: np.ndarray) -> float:
    """sum_j ||d_j||^2 / w_j with the 0/0 convention for zero-distance rows."""
    total = 0.0
    for a, p in zip(sq_norms, w):
        if a == 0.0:
            continue
        if p <= 0.0:
            return math.inf
        total += a / p
    return total


def check_weights_optimal(
    seed: int,
    configs: int = 100,
    simplex_points: int = 1000,
    margin_floor: float = -1e-9,
) -> dict:
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(configs):
        deg = int(rng.integers(2, 9))
        dim = int(rng.integers(1, 6))
        diffs = rng.normal(size=(deg, dim)) * rng.uniform(0.1, 3.0)
        sq = np.einsum("ij,ij->i", diffs, diffs)
        w_star = sampling_weights(np.zeros(dim), -diffs).probs
        best = _weighted_second_moment(sq, w_star)
        candidates = rng.dirichlet(np.ones(deg), size=simplex_points)
        for w in candidates:
            worst = min(worst, _weighted_second_moment(sq, w) - best)
        # projected gradient from the uniform point
        w = np.full(deg, 1.0 / deg)
        for _ in range(300):
            grad = np.where(w > 0, -sq / np.maximum(w, 1e-12) ** 2, 0.0)
            w = project_simplex(w - 1e-3 * grad / (1.0 + np.abs(grad).max()))
        worst = min(worst, _weighted_second_moment(sq, w) - best)
    return _record(
        "weights_optimal",
        worst >= margin_floor,
        f"min margin {worst:.3e} over {configs} configs "
        f"x {simplex_points} simplex points + projected gradient",
    )


# ---------------------------------------------------------------------------
# sampled-update error vs closed-form bound


@dataclass(frozen=True)
class BoundCheckpoint:
    round_index: int
    node: int
    mc_mean: float
    mc_se: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.mc_mean <= self.bound + 3.0 * self.mc_se


def update_error_bound_mc(
    graph: Graph,
    dataset,
    c: float,
    d_prox: float,
    rounds: int,
    every: int,
    draws: int,
    nodes: tuple[int, ...],
    seed: int,
    solve_tol: float = 1e-8,
) -> list[BoundCheckpoint]:
    """Monte Carlo E||x_sampled - x_full||^2 against the closed-form bound.

    Drives the deterministic full-communication reference and, at every
    ``every``-th round, replays single-draw sampled updates from the
    synchronized state for the requested nodes.
    """
    cfg = RunConfig(variant="dsccd", c=c, d_prox=d_prox, max_iters=rounds)
    objectives = node_objectives(dataset)
    reg = dataset.reg
    lambda_max = laplacian_lambda_max(graph)
    states = init_states(graph, dataset.dim)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(1, rounds + 1):
        if k % every == 0:
            eta = eta_schedule(d_prox, k)
            for i in nodes:
                st = states[i]
                nbrs = list(neighbors(graph, i))
                values = np.stack([states[j].x for j in nbrs])
                diffs = st.x[None, :] - values
                weights = sampling_weights(st.x, values)
                gh = grad_h_full(st.x, values, c)
                lin_full = st.p + 2.0 * gh
                x_full = x_update_sccd_l2(
                    objectives[i], reg.lam, st.x, lin_full, eta, solve_tol
                )
                errs = np.empty(draws)
                for t in range(draws):
                    pos = select_nodes(rng, weights, 1)
                    inc = grad_h_sampled(
                        st.x, values[pos], weights.probs[pos], 1, c
                    )
                    x_s = x_update_sccd_l2(
                        objectives[i], reg.lam, st.x, st.p + 2.0 * inc, eta, solve_tol
                    )
                    errs[t] = float(np.sum((x_s - x_full) ** 2))
                bound = variance_bound(c, eta, diffs)
                out.append(
                    BoundCheckpoint(
                        round_index=k,
                        node=i,
                        mc_mean=float(errs.mean()),
                        mc_se=float(errs.std(ddof=1) / math.sqrt(draws)),
                        bound=bound,
                    )
                )
        run_round(
            graph, states, objectives, reg, cfg, k, lambda_max, collect_attempts=False
        )
    return out


def check_variance_bound_mc(
    seed: int,
    n: int = 10,
    dim: int = 20,
    samples: int = 8,
    rounds: int = 40,
    every: int = 10,
    draws: int = 300,
) -> dict:
    graph = generate_erdos_renyi(n, 0.5, seed=seed)
    dataset = synthesize(n, dim, samples, "l2", seed=seed + 1)
    degrees = [graph.degree(i) for i in range(n)]
    nodes = (int(np.argmax(degrees)), int(np.argmin(degrees)))
    checks = update_error_bound_mc(
        graph, dataset, c=0.3, d_prox=0.3, rounds=rounds, every=every,
        draws=draws, nodes=nodes, seed=seed + 2,
    )
    gaps = [(c.bound + 3 * c.mc_se) - c.mc_mean for c in checks]
    passed = all(c.passed for c in checks)
    return _record(
        "variance_bound_mc",
        passed,
        f"{len(checks)} checkpoints, min slack {min(gaps):.3e} "
        f"({draws} draws each)",
    )


# ---------------------------------------------------------------------------
# numerical hygiene


def check_gradient_fd(seed: int, trials: int = 6, tol: float = 1e-6) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        scenario = "l2" if t % 2 == 0 else "l1"
        ds = synthesize(2, int(rng.integers(3, 8)), 5, scenario, seed=int(rng.integers(1 << 30)))
        obj = node_objectives(ds)[0]
        x = rng.normal(size=ds.dim)
        _, grad = obj.value_and_gradient(x)
        step = 1e-5
        for j in range(ds.dim):
            e = np.zeros(ds.dim)
            e[j] = step
            fd = (obj.value(x + e) - obj.value(x - e)) / (2 * step)
            worst = max(worst, abs(fd - grad[j]))
    return _record(
        "gradient_fd",
        worst <= tol,
        f"max per-coordinate gap {worst:.3e} over {trials} instances (tol {tol:g})",
    )


def check_prox_nonexpansive(seed: int, trials: int = 200) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    from .problem import RegularizerSpec

    box_reg = RegularizerSpec(kind="l1", lam=0.3, box_bound=1.0)
    for _ in range(trials):
        dim = int(rng.integers(1, 8))
        x, y = rng.normal(size=(2, dim)) * rng.uniform(0.2, 5.0)
        thr = float(rng.uniform(0.0, 2.0))
        gap = float(
            np.linalg.norm(soft_threshold(x, thr) - soft_threshold(y, thr))
            - np.linalg.norm(x - y)
        )
        worst = max(worst, gap)
        step = float(rng.uniform(0.01, 2.0))
        gap = float(
            np.linalg.norm(
                prox_or_subgrad(x, box_reg, step) - prox_or_subgrad(y, box_reg, step)
            )
            - np.linalg.norm(x - y)
        )
        worst = max(worst, gap)
    return _record(
        "prox_nonexpansive",
        worst <= 1e-12,
        f"max expansion {worst:.3e} over {trials} draws",
    )


def check_weight_normalization(seed: int, trials: int = 200, tol: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        deg = int(rng.integers(1, 12))
        dim = int(rng.integers(1, 6))
        x = rng.normal(size=dim)
        cache = rng.normal(size=(deg, dim)) * rng.uniform(1e-8, 10.0)
        w = sampling_weights(x, cache)
        worst = max(worst, abs(float(w.probs.sum()) - 1.0))
    return _record(
        "weight_normalization",
        worst <= tol,
        f"max |sum w - 1| = {worst:.3e} over {trials} draws (tol {tol:g})",
    )


def check_lambda_max(seed: int, trials: int = 10, tol: float = 1e-6) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(4, 25))
        graph = generate_erdos_renyi(n, float(rng.uniform(0.2, 0.9)), seed=int(rng.integers(1 << 30)))
        dense = float(np.linalg.eigvalsh(laplacian(graph))[-1])
        worst = max(worst, abs(laplacian_lambda_max(graph) - dense))
    return _record(
        "lambda_max_vs_dense",
        worst <= tol,
        f"max eigenvalue gap {worst:.3e} over {trials} graphs (tol {tol:g})",
    )


def run_all(seed: int = 0) -> dict:
    checks = [
        check_estimator_unbiased(seed),
        check_weights_optimal(seed + 1),
        check_variance_bound_mc(seed + 2),
        check_gradient_fd(seed + 3),
        check_prox_nonexpansive(seed + 4),
        check_weight_normalization(seed + 5),
        check_lambda_max(seed + 6),
    ]
    return {"passed": all(c["passed"] for c in checks), "checks": checks, "seed": seed}
