"""Cost, convergence and delay accounting.

Per round, each node is charged ``num_i`` transmissions at ``C_cmm`` each
and ``s_i + 1`` compute units at ``C_cmp`` each (one unit per trial update
plus the final update; full-exchange variants probe nothing, so they pay a
single unit). Delays follow the synchronous model: a round lasts as long as
its slowest node, so per-round delay is the maximum over nodes, and the run
delay is the sum over rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .problem import Dataset, LogisticObjective, consensus_objective_value

__all__ = [
    "CostLedger",
    "DelayModel",
    "DelaySummary",
    "round_costs",
    "record_round",
    "metrics",
    "should_stop",
    "per_value_slot_seconds",
    "delay_summary",
]


def round_costs(
    nums: np.ndarray, s_counts: np.ndarray, c_cmp: float, c_cmm: float
) -> tuple[float, float]:
    """(communication, computation) cost of one round.

    comm = sum_i num_i * C_cmm, comp = sum_i (s_i + 1) * C_cmp.
    """
    nums = np.asarray(nums)
    s_counts = np.asarray(s_counts)
    if nums.shape != s_counts.shape:
        raise ValueError("nums and s_counts must align")
    comm = float(nums.sum()) * c_cmm
    comp = float((s_counts + 1).sum()) * c_cmp
    return comm, comp


@dataclass
class CostLedger:
    """Per-round cost rows for one run."""

    c_cmp: float
    c_cmm: float
    comm_rounds: list[float] = field(default_factory=list)
    comp_rounds: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.c_cmp < 0.0 or self.c_cmm < 0.0:
            raise ValueError("unit costs must be nonnegative")

    @property
    def rounds(self) -> int:
        return len(self.comm_rounds)

    @property
    def comm_total(self) -> float:
        return float(math.fsum(self.comm_rounds))

    @property
    def comp_total(self) -> float:
        return float(math.fsum(self.comp_rounds))

    @property
    def total_cost(self) -> float:
        return self.comm_total + self.comp_total


def record_round(
    ledger: CostLedger, nums: np.ndarray, s_counts: np.ndarray
) -> tuple[float, float]:
    """Charge one round to the ledger and return its (comm, comp) costs."""
    comm, comp = round_costs(nums, s_counts, ledger.c_cmp, ledger.c_cmm)
    ledger.comm_rounds.append(comm)
    ledger.comp_rounds.append(comp)
    return comm, comp


def metrics(
    x_stack: np.ndarray,
    dataset: Dataset,
    obj_star: float,
    pooled: LogisticObjective | None = None,
) -> tuple[float, float]:
    """(accuracy gap, consensus error) of the current iterates.

    acc = (obj(x_bar) - obj*) / obj* with obj the pooled objective at the
    node average; cserr = sum_i ||x_bar - x_i||^2 / n.
    """
    if obj_star <= 0.0:
        raise ValueError("obj_star must be positive")
    x_bar = x_stack.mean(axis=0)
    obj = consensus_objective_value(dataset, x_bar, pooled)
    acc = (obj - obj_star) / obj_star
    diffs = x_stack - x_bar[None, :]
    cserr = float(np.einsum("ij,ij->", diffs, diffs)) / len(x_stack)
    return acc, cserr


def should_stop(
    acc: float, cserr: float, acc_threshold: float, cserr_threshold: float
) -> bool:
    """True once both metrics sit strictly below their thresholds."""
    return acc < acc_threshold and cserr < cserr_threshold


def per_value_slot_seconds(
    dim: int, rate_bits_per_s: float, bits_per_value: int = 32
) -> float:
    """Transmission slot for one dim-sized vector: dim * bits / rate."""
    if dim < 1 or rate_bits_per_s <= 0.0 or bits_per_value < 1:
        raise ValueError("dim, rate and bits_per_value must be positive")
    return dim * bits_per_value / rate_bits_per_s


@dataclass(frozen=True)
class DelayModel:
    """Synchronous delay parameters.

    ``tau`` is the transmission slot per contacted neighbor;
    ``sec_per_compute_unit`` prices one trial-or-final update in
    ``abstract_units`` mode; ``measured_wallclock`` mode uses recorded
    per-node wall times instead.
    """

    tau: float
    sec_per_compute_unit: float = 1.0
    mode: str = "abstract_units"

    def __post_init__(self):
        if self.tau < 0.0 or self.sec_per_compute_unit < 0.0:
            raise ValueError("delay parameters must be nonnegative")
        if self.mode not in ("abstract_units", "measured_wallclock"):
            raise ValueError(f"unknown delay mode {self.mode!r}")


@dataclass(frozen=True)
class DelaySummary:
    comm_delay: float
    comp_delay: float

    @property
    def total_delay(self) -> float:
        return self.comm_delay + self.comp_delay


def delay_summary(
    nums_per_round: Sequence[np.ndarray],
    s_per_round: Sequence[np.ndarray],
    seconds_per_round: Sequence[np.ndarray] | None,
    model: DelayModel,
) -> DelaySummary:
    """Fold per-round node maxima into run delays.

    comm_delay = sum_k tau * max_i num_i(k); comp_delay sums the slowest
    node per round, in abstract units or measured seconds.
    """
    comm = model.tau * math.fsum(float(np.max(nums)) for nums in nums_per_round)
    if model.mode == "abstract_units":
        comp = model.sec_per_compute_unit * math.fsum(
            float(np.max(s) + 1) for s in s_per_round
        )
    else:
        if seconds_per_round is None:
            raise ValueError("measured_wallclock mode needs recorded seconds")
        comp = math.fsum(float(np.max(sec)) for sec in seconds_per_round)
    return DelaySummary(comm_delay=comm, comp_delay=comp)
