"""Per-round communication adaptation.

Each node decides every round how many neighbors to contact and which ones.
Neighbors are drawn i.i.d. with replacement from an importance distribution
proportional to the distance between the node's current iterate and its
stored (possibly stale) copy of each neighbor, which minimizes the variance
of the sampled dual/gradient estimator among all distributions on the
simplex. The count itself comes from a descending search that keeps
shrinking the candidate count while the measured cost per unit of predicted
progress does not increase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SamplingWeights",
    "SearchAttempt",
    "sampling_weights",
    "select_nodes",
    "progress_objective",
    "progress_consensus",
    "cost_per_progress",
    "search_num",
    "variance_bound",
]


@dataclass(frozen=True)
class SamplingWeights:
    """Selection distribution over a node's neighbor list.

    ``probs`` aligns with the sorted neighbor list and sums to 1;
    ``uniform_fallback`` marks the all-distances-zero case where the
    distance-proportional rule is undefined and a uniform draw is used.
    """

    probs: np.ndarray
    uniform_fallback: bool

    def __post_init__(self):
        if self.probs.ndim != 1 or len(self.probs) == 0:
            raise ValueError("probs must be a nonempty vector")
        if (self.probs < 0.0).any():
            raise ValueError("probs must be nonnegative")
        if not math.isclose(float(self.probs.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("probs must sum to 1")


@dataclass(frozen=True)
class SearchAttempt:
    """One probed communication count: attempt index, count, predicted
    progress and the cost-per-progress score."""

    s: int
    num: int
    gamma: float
    score: float


def sampling_weights(x_i: np.ndarray, cache_rows: np.ndarray) -> SamplingWeights:
    """Distance-proportional selection probabilities from the stale cache.

    ``cache_rows`` holds one stored neighbor value per row. When every
    distance is zero the distribution falls back to uniform.
    """
    diffs = cache_rows - x_i[None, :]
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    total = float(dists.sum())
    if total <= 0.0:
        deg = len(dists)
        return SamplingWeights(np.full(deg, 1.0 / deg), uniform_fallback=True)
    return SamplingWeights(dists / total, uniform_fallback=False)


def select_nodes(
    rng: np.random.Generator, weights: SamplingWeights, num: int
) -> np.ndarray:
    """Draw ``num`` neighbor positions i.i.d. with replacement.

    Duplicates are legitimate: every draw is a transmission. Returns
    positions into the neighbor list, not node ids.
    """
    if num < 1:
        raise ValueError("num must be >= 1")
    return rng.choice(len(weights.probs), size=num, replace=True, p=weights.probs)


def progress_objective(phi_prev: float, phi_hat: float) -> float:
    """Predicted progress for the smooth-objective scenario:
    |phi(x_prev) - phi(x_hat)| with phi the local loss plus regularizer."""
    return abs(phi_prev - phi_hat)


def progress_consensus(
    cache_mean: np.ndarray, x_prev: np.ndarray, x_hat: np.ndarray
) -> float:
    """Predicted progress for the l1 scenario: change in distance to the
    stored neighborhood mean, both terms using the same (stale) mean."""
    return abs(
        float(np.linalg.norm(cache_mean - x_prev))
        - float(np.linalg.norm(cache_mean - x_hat))
    )


def cost_per_progress(
    s: int, num: int, gamma: float, c_cmp: float, c_cmm: float
) -> float:
    """Search score: ((s + 1) * C_cmp + num * C_cmm) / gamma.

    Zero predicted progress scores as +inf so the candidate never looks
    attractive.
    """
    if gamma <= 0.0:
        return math.inf
    return ((s + 1) * c_cmp + num * c_cmm) / gamma


def search_num(
    prev_num: int,
    degree: int,
    round_index: int,
    stepsize: int,
    c_cmp: float,
    c_cmm: float,
    evaluate: Callable[[int, int], float],
    search_return: str = "best",
) -> tuple[int, list[SearchAttempt]]:
    """Descending search for the communication count of one node and round.

    The first candidate is ``ceil(degree / 2)`` in round 1 and the previous
    round's count afterwards; subsequent candidates shrink by ``stepsize``
    with a floor of 1. ``evaluate(s, num)`` must return the predicted
    progress of a trial update that contacts ``num`` sampled neighbors.
    Probing continues while the score is non-increasing and stops early once
    two consecutive candidates sit at the floor. ``search_return`` picks the
    result: ``literal`` returns the last probed count, ``best`` the count
    with the smallest score (ties favor fewer transmissions).

    The returned count never exceeds the starting candidate, so per-node
    counts are non-increasing across rounds.
    """
    if search_return not in ("literal", "best"):
        raise ValueError(f"unknown search_return {search_return!r}")
    if not 1 <= prev_num <= degree:
        raise ValueError("prev_num out of range")
    if stepsize < 1:
        raise ValueError("stepsize must be >= 1")

    start = math.ceil(degree / 2) if round_index == 1 else prev_num

    def probe(s: int, num: int) -> SearchAttempt:
        gamma = float(evaluate(s, num))
        return SearchAttempt(
            s=s, num=num, gamma=gamma, score=cost_per_progress(s, num, gamma, c_cmp, c_cmm)
        )

    attempts = [probe(0, start)]
    attempts.append(probe(1, max(start - stepsize, 1)))
    while attempts[-1].score <= attempts[-2].score:
        if attempts[-1].num == 1 and attempts[-2].num == 1:
            break
        s = attempts[-1].s + 1
        attempts.append(probe(s, max(attempts[-1].num - stepsize, 1)))

    if search_return == "literal":
        final = attempts[-1].num
    else:
        final = min(attempts, key=lambda a: (a.score, a.num)).num
    return final, attempts


def variance_bound(
    c: float, eta: float, diffs: Sequence[np.ndarray] | np.ndarray
) -> float:
    """Closed-form bound on the sampled-update error variance.

    ``diffs`` stacks x_i minus each stored neighbor value. Under the
    distance-proportional distribution with one draw, the estimator variance
    is c^2 * ((sum_j ||d_j||)^2 - ||sum_j d_j||^2) and the induced update
    error is bounded by eta^2 times that: the proximal term's modulus 2/eta
    gives the pathwise bound ||x_sampled - x_full|| <= eta * ||gradient
    disagreement||, and convexity of the loss and regularizer only shrink it.
    """
    diffs = np.asarray(diffs, dtype=float)
    norms = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    total = float(norms.sum())
    sum_norm = float(np.linalg.norm(diffs.sum(axis=0)))
    spread = total * total - sum_norm * sum_norm
    return c * c * eta * eta * max(spread, 0.0)
