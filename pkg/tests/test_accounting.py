"""Tests for cost rows, convergence metrics, stopping and the delay model.

Cost and delay folds are checked against hand-computed sums; the metric pair
is recomputed from the raw iterate stack and pooled objective.
"""

import math

import numpy as np
import pytest

from sccd_admm import (
    CostLedger,
    DelayModel,
    DelaySummary,
    consensus_objective_value,
    delay_summary,
    metrics,
    per_value_slot_seconds,
    record_round,
    round_costs,
    should_stop,
    synthesize,
)


# ---------------------------------------------------------------------------
# per-round cost rows


def test_round_costs_hand_example():
    # comm = (2+1+3)*0.4 = 2.4, comp = (1+2+4)*1.0 = 7
    comm, comp = round_costs(
        np.array([2, 1, 3]), np.array([0, 1, 3]), c_cmp=1.0, c_cmm=0.4
    )
    assert comm == pytest.approx(2.4, abs=1e-15)
    assert comp == pytest.approx(7.0, abs=0)


def test_round_costs_free_communication():
    comm, comp = round_costs(
        np.array([4, 4, 4]), np.array([0, 0, 0]), c_cmp=1.0, c_cmm=0.0
    )
    assert comm == 0.0
    assert comp == 3.0


def test_round_costs_full_exchange_matches_edge_count():
    # when every node contacts all neighbors, messages = sum of degrees = 2|E|
    degrees = np.array([2, 3, 1, 2])
    comm, _ = round_costs(degrees, np.zeros(4, dtype=int), c_cmp=1.0, c_cmm=0.5)
    assert comm == pytest.approx(0.5 * degrees.sum(), abs=0)


def test_round_costs_node_order_invariant():
    rng = np.random.default_rng(7)
    nums = rng.integers(1, 9, size=12)
    s = rng.integers(0, 5, size=12)
    perm = rng.permutation(12)
    assert round_costs(nums, s, 1.0, 0.7) == round_costs(nums[perm], s[perm], 1.0, 0.7)


def test_round_costs_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        round_costs(np.array([1, 2]), np.array([0]), 1.0, 1.0)


def test_ledger_folds_rounds():
    ledger = CostLedger(c_cmp=1.0, c_cmm=0.4)
    rows = [
        (np.array([2, 1, 3]), np.array([0, 1, 3])),
        (np.array([1, 1, 1]), np.array([0, 0, 0])),
    ]
    for nums, s in rows:
        record_round(ledger, nums, s)
    assert ledger.rounds == 2
    assert ledger.comm_total == pytest.approx(2.4 + 1.2, abs=1e-15)
    assert ledger.comp_total == pytest.approx(7.0 + 3.0, abs=0)
    assert ledger.total_cost == pytest.approx(ledger.comm_total + ledger.comp_total)


def test_ledger_rejects_negative_unit_costs():
    with pytest.raises(ValueError):
        CostLedger(c_cmp=-1.0, c_cmm=0.0)


# ---------------------------------------------------------------------------
# metrics and stopping


def test_metrics_recompute_from_stack():
    ds = synthesize(3, 4, 5, "l2", seed=11)
    rng = np.random.default_rng(0)
    x_stack = rng.normal(size=(3, 4))
    x_bar = x_stack.mean(axis=0)
    obj_star = 0.5 * consensus_objective_value(ds, x_bar)
    acc, cserr = metrics(x_stack, ds, obj_star)
    assert acc == pytest.approx(
        (consensus_objective_value(ds, x_bar) - obj_star) / obj_star, rel=1e-12
    )
    manual = sum(float(np.sum((x_bar - xi) ** 2)) for xi in x_stack) / 3
    assert cserr == pytest.approx(manual, rel=1e-12)


def test_metrics_zero_at_consensus_on_optimum():
    ds = synthesize(2, 3, 6, "l2", seed=5)
    x = np.array([0.3, -0.1, 0.2])
    obj_star = consensus_objective_value(ds, x)
    acc, cserr = metrics(np.tile(x, (2, 1)), ds, obj_star)
    assert acc == pytest.approx(0.0, abs=1e-14)
    assert cserr == 0.0


def test_metrics_rejects_nonpositive_optimum():
    ds = synthesize(2, 3, 6, "l2", seed=5)
    with pytest.raises(ValueError):
        metrics(np.zeros((2, 3)), ds, 0.0)


def test_should_stop_requires_both_strict():
    assert should_stop(0.05, 0.05, 0.1, 0.1)
    assert not should_stop(0.1, 0.05, 0.1, 0.1)
    assert not should_stop(0.05, 0.1, 0.1, 0.1)
    assert not should_stop(0.5, 0.5, 0.1, 0.1)


# ---------------------------------------------------------------------------
# delay model


def test_slot_seconds_for_studied_rates():
    # 100 values * 32 bit over 54 Mbps and 11 Mbps
    assert per_value_slot_seconds(100, 54e6) == pytest.approx(
        5.925925925925926e-05, rel=1e-12
    )
    assert per_value_slot_seconds(100, 11e6) == pytest.approx(
        2.909090909090909e-04, rel=1e-12
    )


def test_slot_seconds_validation():
    with pytest.raises(ValueError):
        per_value_slot_seconds(0, 54e6)
    with pytest.raises(ValueError):
        per_value_slot_seconds(100, 0.0)


def test_delay_model_validation():
    with pytest.raises(ValueError):
        DelayModel(tau=-1e-5)
    with pytest.raises(ValueError):
        DelayModel(tau=1e-5, mode="async")


def test_single_node_unit_num_comm_delay():
    # one node contacting one neighbor for 10 rounds waits 10 slots
    model = DelayModel(tau=2.0, sec_per_compute_unit=0.0)
    nums = [np.array([1])] * 10
    s = [np.array([0])] * 10
    out = delay_summary(nums, s, None, model)
    assert out.comm_delay == pytest.approx(20.0, abs=0)
    assert out.comp_delay == 0.0


def test_delays_take_per_round_maxima():
    model = DelayModel(tau=1.0, sec_per_compute_unit=2.0)
    nums = [np.array([3, 1]), np.array([1, 2])]
    s = [np.array([0, 4]), np.array([1, 0])]
    out = delay_summary(nums, s, None, model)
    # comm: 3 + 2; comp: 2*(5 + 2)
    assert out.comm_delay == pytest.approx(5.0, abs=0)
    assert out.comp_delay == pytest.approx(14.0, abs=0)
    assert out.total_delay == pytest.approx(19.0, abs=0)


def test_measured_mode_sums_slowest_node_seconds():
    model = DelayModel(tau=0.0, mode="measured_wallclock")
    nums = [np.array([1, 1])] * 3
    s = [np.array([0, 0])] * 3
    secs = [np.array([0.2, 0.5]), np.array([0.4, 0.1]), np.array([0.3, 0.3])]
    out = delay_summary(nums, s, secs, model)
    assert out.comp_delay == pytest.approx(0.5 + 0.4 + 0.3, rel=1e-12)


def test_measured_mode_requires_seconds():
    model = DelayModel(tau=0.0, mode="measured_wallclock")
    with pytest.raises(ValueError):
        delay_summary([np.array([1])], [np.array([0])], None, model)


def test_summary_total_is_sum():
    out = DelaySummary(comm_delay=1.5, comp_delay=2.25)
    assert out.total_delay == 3.75
