"""Synchronous round engine for decentralized consensus ADMM.

Three variants share one loop:

* ``dadmm``: every node contacts all neighbors, updates its aggregate dual
  with the full disagreement sum and minimizes the exact augmented local
  objective (quadratic coupling to pairwise midpoints).
* ``sccd``: every node samples a searched number of neighbors i.i.d. from
  the distance-proportional distribution, updates the dual with the
  importance-weighted disagreement estimate, and minimizes a linearized
  objective with a proximal term whose step eta_k = D / sqrt(2 k) shrinks
  over rounds.
* ``dsccd``: the sampling-free reference; the sccd update rules evaluated on
  the full neighbor set with no importance weighting. Deterministic.

Rounds are synchronous: all reads reference the previous round's iterates,
so node processing order cannot change the result. Every random draw comes
from a per-(node, round) stream, which also makes runs independent of
execution order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import accounting
from .adapt import (
    SamplingWeights,
    progress_consensus,
    progress_objective,
    sampling_weights,
    search_num,
    select_nodes,
)
from .problem import (
    Dataset,
    LogisticObjective,
    RegularizerSpec,
    centralized_reference,
    node_objectives,
    pooled_objective,
    regularizer_value,
)
from .rngstream import node_round_rng
from .solvers import fista_box_l1, minimize_l2_composite
from .topology import Graph, laplacian_lambda_max

__all__ = [
    "NodeState",
    "RunConfig",
    "RoundRecord",
    "RunResult",
    "eta_schedule",
    "init_states",
    "p_update_full",
    "p_update_sampled",
    "grad_h_full",
    "grad_h_sampled",
    "x_update_sccd_l2",
    "x_update_sccd_l1",
    "x_update_dadmm",
    "dsccd_step",
    "run_round",
    "run",
]

VARIANTS = ("dadmm", "sccd", "dsccd")


@dataclass
class NodeState:
    """One node's mutable state between rounds.

    ``cache_x`` rows align with the sorted neighbor list and hold the most
    recently received value of each neighbor; ``cache_tag`` records the
    round that value belongs to. ``num_comm`` is the number of neighbors
    contacted in the last round.
    """

    node_id: int
    x: np.ndarray
    p: np.ndarray
    cache_x: np.ndarray
    cache_tag: np.ndarray
    num_comm: int


@dataclass(frozen=True)
class RunConfig:
    """All knobs of one run. ``c_cmm = c_cmp * co_rat``."""

    variant: str
    c: float
    d_prox: float = 0.3
    c_cmp: float = 1.0
    co_rat: float = 0.1
    stepsize: int = 2
    acc_threshold: float = 0.1
    cserr_threshold: float = 0.1
    max_iters: int = 5000
    master_seed: int = 0
    sampling_mode: str = "with_replacement"
    search_return: str = "best"
    dedup_selected: bool = False
    full_comm_when_free: bool = True
    gd_tol: float = 1e-7
    trial_tol: float = 1e-4
    fista_rho: float = 0.01
    fista_beta: float = 0.1
    fista_prg_tol: float = 1e-2
    fista_stabilize: bool = True
    inner_budget: int = 200_000

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.c <= 0.0 or self.d_prox <= 0.0:
            raise ValueError("c and d_prox must be positive")
        if self.co_rat < 0.0 or self.c_cmp <= 0.0:
            raise ValueError("co_rat must be >= 0 and c_cmp > 0")
        if self.stepsize < 1:
            raise ValueError("stepsize must be >= 1")
        if self.sampling_mode != "with_replacement":
            raise ValueError("only with_replacement sampling is supported")
        if self.search_return not in ("literal", "best"):
            raise ValueError(f"unknown search_return {self.search_return!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @property
    def c_cmm(self) -> float:
        return self.c_cmp * self.co_rat


@dataclass
class RoundRecord:
    """Per-round outcome: communication counts, search lengths, trial log
    and measured per-node compute time."""

    round_index: int
    eta: float
    eta_warning: bool
    nums: np.ndarray  # transmissions charged per node
    search_s: np.ndarray  # final attempt index per node (0 when no search)
    attempts: list[tuple[int, int, int, float, float]]  # node, s, num, gamma, score
    compute_seconds: np.ndarray


@dataclass
class RunResult:
    """Full trace of one run."""

    config: RunConfig
    iterations: int
    converged: bool
    acc: np.ndarray
    cserr: np.ndarray
    mean_num: np.ndarray
    comm_round: np.ndarray
    comp_round: np.ndarray
    eta_warnings: np.ndarray
    nums_per_round: list[np.ndarray]
    s_per_round: list[np.ndarray]
    seconds_per_round: list[np.ndarray]
    attempts: list[tuple[int, int, int, int, float, float]]  # round prepended
    obj_star: float
    lambda_max: float
    states: list[NodeState] = field(repr=False, default_factory=list)

    @property
    def comm_total(self) -> float:
        return float(self.comm_round.sum())

    @property
    def comp_total(self) -> float:
        return float(self.comp_round.sum())


def eta_schedule(d_prox: float, k: int) -> float:
    """Proximal step of round k (k starts at 1): D / sqrt(2 k)."""
    if k < 1:
        raise ValueError("rounds are indexed from 1")
    return d_prox / math.sqrt(2.0 * k)


def init_states(graph: Graph, dim: int) -> list[NodeState]:
    """All-zero primal/dual state; caches hold the round-0 zeros."""
    states = []
    for i in range(graph.n):
        deg = graph.degree(i)
        states.append(
            NodeState(
                node_id=i,
                x=np.zeros(dim),
                p=np.zeros(dim),
                cache_x=np.zeros((deg, dim)),
                cache_tag=np.zeros(deg, dtype=np.int64),
                num_comm=deg,
            )
        )
    return states


# ---------------------------------------------------------------------------
# update rules


def p_update_full(
    x_i: np.ndarray, p_i: np.ndarray, neighbor_values: np.ndarray, c: float
) -> np.ndarray:
    """Dual step with the full disagreement sum over all neighbors."""
    if neighbor_values.ndim != 2 or len(neighbor_values) == 0:
        raise ValueError("neighbor_values must be a nonempty (deg, dim) array")
    deg = len(neighbor_values)
    return p_i + c * (deg * x_i - neighbor_values.sum(axis=0))


def _sampled_disagreement(
    x_i: np.ndarray,
    selected_values: np.ndarray,
    selected_probs: np.ndarray,
    num: int,
    c: float,
) -> np.ndarray:
    """(c / num) * sum_t (x_i - x_t) / w_t over the sampled draws."""
    if len(selected_values) != num or len(selected_probs) != num:
        raise ValueError("one value and one probability per draw expected")
    if (selected_probs <= 0.0).any():
        raise ValueError("a zero-probability neighbor was selected")
    scaled = (x_i[None, :] - selected_values) / selected_probs[:, None]
    return (c / num) * scaled.sum(axis=0)


def p_update_sampled(
    x_i: np.ndarray,
    p_i: np.ndarray,
    selected_values: np.ndarray,
    selected_probs: np.ndarray,
    num: int,
    c: float,
) -> np.ndarray:
    """Dual step with the importance-weighted sampled disagreement."""
    return p_i + _sampled_disagreement(x_i, selected_values, selected_probs, num, c)


def grad_h_full(x_i: np.ndarray, neighbor_values: np.ndarray, c: float) -> np.ndarray:
    """Gradient of the full quadratic coupling at the current iterate:
    c * sum_j (x_i - x_j)."""
    deg = len(neighbor_values)
    return c * (deg * x_i - neighbor_values.sum(axis=0))


def grad_h_sampled(
    x_i: np.ndarray,
    selected_values: np.ndarray,
    selected_probs: np.ndarray,
    num: int,
    c: float,
) -> np.ndarray:
    """Sampled, importance-weighted counterpart of :func:`grad_h_full`.

    Equals the dual increment of the same draws, and is unbiased for the
    full-sum gradient whenever the weights cover every differing neighbor.
    """
    return _sampled_disagreement(x_i, selected_values, selected_probs, num, c)


def x_update_sccd_l2(
    objective: LogisticObjective,
    lam: float,
    x_prev: np.ndarray,
    lin: np.ndarray,
    eta: float,
    tol: float,
    budget: int = 200_000,
) -> np.ndarray:
    """Minimize f(x) + lam*||x||_2 + lin.x + ||x - x_prev||^2 / eta."""
    inv_eta = 1.0 / eta

    def fg(x):
        val, grad = objective.value_and_gradient(x)
        d = x - x_prev
        val += float(lin @ x) + inv_eta * float(d @ d)
        return val, grad + lin + (2.0 * inv_eta) * d

    x_new, _ = minimize_l2_composite(fg, x_prev, l2_lam=lam, tol=tol, max_iters=budget)
    return x_new


def x_update_sccd_l1(
    objective: LogisticObjective,
    reg: RegularizerSpec,
    x_prev: np.ndarray,
    lin: np.ndarray,
    eta: float,
    rho: float,
    l1_threshold: float,
    prg_tol: float,
    budget: int = 200_000,
) -> np.ndarray:
    """Box-constrained l1 version of the linearized proximal update."""
    inv_eta = 1.0 / eta

    def grad(z):
        return objective.gradient(z) + lin + (2.0 * inv_eta) * (z - x_prev)

    x_new, _ = fista_box_l1(
        grad, x_prev, rho, l1_threshold, reg.box_bound, prg_tol, budget
    )
    return x_new


def x_update_dadmm(
    objective: LogisticObjective,
    reg: RegularizerSpec,
    x_prev: np.ndarray,
    p_new: np.ndarray,
    neighbor_values: np.ndarray,
    c: float,
    tol: float,
    rho: float = 0.01,
    l1_threshold: float = 0.0,
    prg_tol: float = 1e-2,
    budget: int = 200_000,
) -> np.ndarray:
    """Minimize f(x) + lam*r(x) + p.x + c * sum_j ||x - (x_prev + x_j)/2||^2."""
    deg = len(neighbor_values)
    anchors_sum = 0.5 * (deg * x_prev + neighbor_values.sum(axis=0))
    anchors_sq = 0.25 * float(
        np.einsum("ij,ij->", x_prev[None, :] + neighbor_values, x_prev[None, :] + neighbor_values)
    )
    if reg.kind == "l2":

        def fg(x):
            val, grad = objective.value_and_gradient(x)
            xx = float(x @ x)
            val += float(p_new @ x) + c * (deg * xx - 2.0 * float(anchors_sum @ x) + anchors_sq)
            return val, grad + p_new + 2.0 * c * (deg * x - anchors_sum)

        x_new, _ = minimize_l2_composite(
            fg, x_prev, l2_lam=reg.lam, tol=tol, max_iters=budget
        )
        return x_new

    def grad(z):
        return objective.gradient(z) + p_new + 2.0 * c * (deg * z - anchors_sum)

    x_new, _ = fista_box_l1(
        grad, x_prev, rho, l1_threshold, reg.box_bound, prg_tol, budget
    )
    return x_new


def dsccd_step(
    objective: LogisticObjective,
    reg: RegularizerSpec,
    x_prev: np.ndarray,
    p_prev: np.ndarray,
    neighbor_values: np.ndarray,
    c: float,
    eta: float,
    tol: float,
    rho: float = 0.01,
    l1_threshold: float = 0.0,
    prg_tol: float = 1e-2,
    budget: int = 200_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-set linearized update: the sampling-free reference variant."""
    p_new = p_update_full(x_prev, p_prev, neighbor_values, c)
    gh = grad_h_full(x_prev, neighbor_values, c)
    lin = p_new + gh
    if reg.kind == "l2":
        x_new = x_update_sccd_l2(objective, reg.lam, x_prev, lin, eta, tol, budget)
    else:
        x_new = x_update_sccd_l1(
            objective, reg, x_prev, lin, eta, rho, l1_threshold, prg_tol, budget
        )
    return x_new, p_new


# ---------------------------------------------------------------------------
# round loop


class _RunContext:
    """Precomputed per-run arrays: neighbor index vectors, Lipschitz bounds."""

    def __init__(self, graph: Graph, objectives, cfg: RunConfig):
        self.nbrs = [np.asarray(graph.adjacency[i], dtype=np.intp) for i in range(graph.n)]
        self.lipschitz = [obj.lipschitz_upper() for obj in objectives]
        self.cfg = cfg

    def fista_rho(self, i: int, quad_curvature: float) -> float:
        """Stable step for node i: the configured rho, capped just below the
        inverse smooth Lipschitz bound when stabilization is on."""
        cfg = self.cfg
        if not cfg.fista_stabilize:
            return cfg.fista_rho
        lip = self.lipschitz[i] + quad_curvature
        if lip <= 0.0:
            return cfg.fista_rho
        return min(cfg.fista_rho, 0.9 / lip)


def _full_exchange_sccd(cfg: RunConfig) -> bool:
    # communication is free: contact everyone, skip the search
    return cfg.c_cmm == 0.0 and cfg.full_comm_when_free


def run_round(
    graph: Graph,
    states: list[NodeState],
    objectives,
    reg: RegularizerSpec,
    cfg: RunConfig,
    k: int,
    lambda_max: float,
    ctx: _RunContext | None = None,
    collect_attempts: bool = True,
) -> RoundRecord:
    """Advance all nodes one synchronous round (round index k >= 1).

    States are mutated in place, but every read references the snapshot of
    the previous round, so the result is independent of processing order.
    """
    if ctx is None:
        ctx = _RunContext(graph, objectives, cfg)
    n = graph.n
    n_nodes_total = n
    x_old = np.empty((n, states[0].x.shape[0]))
    for st in states:
        x_old[st.node_id] = st.x
    uses_eta = cfg.variant in ("sccd", "dsccd")
    eta = eta_schedule(cfg.d_prox, k) if uses_eta else math.nan
    warning = bool(uses_eta and 2.0 / eta <= cfg.c * lambda_max)

    nums = np.zeros(n, dtype=np.int64)
    search_s = np.zeros(n, dtype=np.int64)
    seconds = np.zeros(n)
    attempts_log: list[tuple[int, int, int, float, float]] = []

    sccd_sampling = cfg.variant == "sccd" and not _full_exchange_sccd(cfg)

    for st in states:
        i = st.node_id
        t0 = time.perf_counter()
        nbrs = ctx.nbrs[i]
        deg = len(nbrs)
        obj = objectives[i]
        x_prev = x_old[i]

        if cfg.variant == "dadmm":
            vals = x_old[nbrs]
            p_new = p_update_full(x_prev, st.p, vals, cfg.c)
            if reg.kind == "l2":
                x_new = x_update_dadmm(
                    obj, reg, x_prev, p_new, vals, cfg.c, cfg.gd_tol, budget=cfg.inner_budget
                )
            else:
                rho = ctx.fista_rho(i, 2.0 * cfg.c * deg)
                x_new = x_update_dadmm(
                    obj,
                    reg,
                    x_prev,
                    p_new,
                    vals,
                    cfg.c,
                    cfg.gd_tol,
                    rho=rho,
                    l1_threshold=cfg.fista_beta * rho / n_nodes_total,
                    prg_tol=cfg.fista_prg_tol,
                    budget=cfg.inner_budget,
                )
            st.cache_x[:] = vals
            st.cache_tag[:] = k - 1
            st.num_comm = deg
            nums[i] = deg
        elif not sccd_sampling:
            # dsccd, or sccd running with free communication
            vals = x_old[nbrs]
            rho = ctx.fista_rho(i, 2.0 / eta) if reg.kind == "l1" else cfg.fista_rho
            x_new, p_new = dsccd_step(
                obj,
                reg,
                x_prev,
                st.p,
                vals,
                cfg.c,
                eta,
                cfg.gd_tol,
                rho=rho,
                l1_threshold=cfg.fista_beta * rho / n_nodes_total,
                prg_tol=cfg.fista_prg_tol,
                budget=cfg.inner_budget,
            )
            st.cache_x[:] = vals
            st.cache_tag[:] = k - 1
            st.num_comm = deg
            nums[i] = deg
        else:
            rng = node_round_rng(cfg.master_seed, i, k)
            weights = sampling_weights(x_prev, st.cache_x)
            rho = ctx.fista_rho(i, 2.0 / eta) if reg.kind == "l1" else cfg.fista_rho
            thr = cfg.fista_beta * rho / n_nodes_total

            if reg.kind == "l2":
                phi_prev = obj.value(x_prev) + regularizer_value(x_prev, reg)
            else:
                cache_mean = st.cache_x.mean(axis=0)

            def evaluate(s_idx: int, num: int) -> float:
                pos = select_nodes(rng, weights, num)
                trial_vals = st.cache_x[pos]
                inc = _sampled_disagreement(
                    x_prev, trial_vals, weights.probs[pos], num, cfg.c
                )
                lin = st.p + 2.0 * inc
                if reg.kind == "l2":
                    x_hat = x_update_sccd_l2(
                        obj, reg.lam, x_prev, lin, eta, cfg.trial_tol, cfg.inner_budget
                    )
                    phi_hat = obj.value(x_hat) + regularizer_value(x_hat, reg)
                    return progress_objective(phi_prev, phi_hat)
                x_hat = x_update_sccd_l1(
                    obj, reg, x_prev, lin, eta, rho, thr, cfg.fista_prg_tol,
                    cfg.inner_budget,
                )
                return progress_consensus(cache_mean, x_prev, x_hat)

            num_final, attempts = search_num(
                st.num_comm,
                deg,
                k,
                cfg.stepsize,
                cfg.c_cmp,
                cfg.c_cmm,
                evaluate,
                cfg.search_return,
            )
            if collect_attempts:
                for att in attempts:
                    attempts_log.append((i, att.s, att.num, att.gamma, att.score))
            search_s[i] = attempts[-1].s

            pos_final = select_nodes(rng, weights, num_final)
            true_vals = x_old[nbrs[pos_final]]
            inc = _sampled_disagreement(
                x_prev, true_vals, weights.probs[pos_final], num_final, cfg.c
            )
            p_new = st.p + inc
            lin = p_new + inc
            if reg.kind == "l2":
                x_new = x_update_sccd_l2(
                    obj, reg.lam, x_prev, lin, eta, cfg.gd_tol, cfg.inner_budget
                )
            else:
                x_new = x_update_sccd_l1(
                    obj, reg, x_prev, lin, eta, rho, thr, cfg.fista_prg_tol,
                    cfg.inner_budget,
                )
            st.cache_x[pos_final] = true_vals
            st.cache_tag[pos_final] = k - 1
            st.num_comm = int(num_final)
            nums[i] = (
                len(np.unique(pos_final)) if cfg.dedup_selected else int(num_final)
            )

        st.x = x_new
        st.p = p_new
        seconds[i] = time.perf_counter() - t0

    return RoundRecord(
        round_index=k,
        eta=eta,
        eta_warning=warning,
        nums=nums,
        search_s=search_s,
        attempts=attempts_log,
        compute_seconds=seconds,
    )


def run(
    graph: Graph,
    dataset: Dataset,
    cfg: RunConfig,
    obj_star: float | None = None,
    lambda_max: float | None = None,
    collect_attempts: bool = True,
) -> RunResult:
    """Run one experiment to the stopping rule or the iteration cap."""
    if dataset.n_nodes != graph.n:
        raise ValueError("dataset and graph disagree on the node count")
    objectives = node_objectives(dataset)
    pooled = pooled_objective(dataset)
    if obj_star is None:
        _, obj_star = centralized_reference(dataset)
    if lambda_max is None:
        lambda_max = laplacian_lambda_max(graph)
    ctx = _RunContext(graph, objectives, cfg)
    states = init_states(graph, dataset.dim)
    reg = dataset.reg

    acc_hist: list[float] = []
    cserr_hist: list[float] = []
    mean_num: list[float] = []
    comm_round: list[float] = []
    comp_round: list[float] = []
    warnings: list[bool] = []
    nums_per_round: list[np.ndarray] = []
    s_per_round: list[np.ndarray] = []
    seconds_per_round: list[np.ndarray] = []
    attempts_all: list[tuple[int, int, int, int, float, float]] = []

    converged = False
    iterations = 0
    for k in range(1, cfg.max_iters + 1):
        rec = run_round(
            graph, states, objectives, reg, cfg, k, lambda_max, ctx, collect_attempts
        )
        comm, comp = accounting.round_costs(rec.nums, rec.search_s, cfg.c_cmp, cfg.c_cmm)
        x_stack = np.stack([st.x for st in states])
        acc, cserr = accounting.metrics(x_stack, dataset, obj_star, pooled)

        iterations = k
        acc_hist.append(acc)
        cserr_hist.append(cserr)
        mean_num.append(float(rec.nums.mean()))
        comm_round.append(comm)
        comp_round.append(comp)
        warnings.append(rec.eta_warning)
        nums_per_round.append(rec.nums)
        s_per_round.append(rec.search_s)
        seconds_per_round.append(rec.compute_seconds)
        if collect_attempts:
            attempts_all.extend((k,) + row for row in rec.attempts)

        if accounting.should_stop(acc, cserr, cfg.acc_threshold, cfg.cserr_threshold):
            converged = True
            break

    return RunResult(
        config=cfg,
        iterations=iterations,
        converged=converged,
        acc=np.asarray(acc_hist),
        cserr=np.asarray(cserr_hist),
        mean_num=np.asarray(mean_num),
        comm_round=np.asarray(comm_round),
        comp_round=np.asarray(comp_round),
        eta_warnings=np.asarray(warnings, dtype=bool),
        nums_per_round=nums_per_round,
        s_per_round=s_per_round,
        seconds_per_round=seconds_per_round,
        attempts=attempts_all,
        obj_star=float(obj_star),
        lambda_max=float(lambda_max),
        states=states,
    )
