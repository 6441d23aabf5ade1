import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from batches import hand_instance, hand_solution
from refuelplan.domain import (
    BaselineError,
    DimensionError,
    DispatchPlan,
    GapError,
    InstanceError,
    OutageSchedule,
    Solution,
    StretchProfile,
    aggregate_stats,
    baseline_schedule,
    campaign_mask,
    financial_cost,
    gap,
    penalty,
    stability_cost,
    validate,
)


@pytest.fixture
def inst():
    return hand_instance()


def _with_dispatch(sol: Solution, **arrays) -> Solution:
    d = sol.dispatch
    fields = {n: np.array(getattr(d, n)) for n in
              ("refuel", "t2_production", "t1_production", "fuel_start", "fuel_end", "horizon_fuel")}
    fields.update(arrays)
    return replace(sol, dispatch=DispatchPlan(**fields))


def test_hand_solution_cost_and_fuel(inst):
    sol = hand_solution(inst)
    d = sol.dispatch
    assert d.fuel_end[0, 0] == pytest.approx(10.0)
    assert d.fuel_start[0, 1] == pytest.approx(40.0 - 0.25 * 10.0)
    assert d.horizon_fuel[0] == pytest.approx(7.5)
    assert financial_cost(d, inst) == pytest.approx(40.0 + 20.0 - 7.5)
    assert sol.cost.financial == pytest.approx(52.5)
    assert validate(sol, inst) == []


def test_demand_violation_is_reported(inst):
    sol = hand_solution(inst)
    p1 = np.array(sol.dispatch.t1_production)
    p1[0, 2] = 9.0
    tags = {v.tag for v in validate(_with_dispatch(sol, t1_production=p1), inst)}
    assert "CT1" in tags


def test_production_during_outage_is_reported(inst):
    sol = hand_solution(inst)
    p2 = np.array(sol.dispatch.t2_production)
    p2[0, 1, 2] = 1.0
    tags = {v.tag for v in validate(_with_dispatch(sol, t2_production=p2), inst)}
    assert "CT3" in tags


def test_refuel_bound_and_window_violations(inst):
    sol = hand_solution(inst)
    refuel = np.array(sol.dispatch.refuel)
    refuel[0, 1] = 41.0
    assert any(v.tag == "CT7" for v in validate(_with_dispatch(sol, refuel=refuel), inst))
    early = replace(sol, schedule=OutageSchedule(((2,),)))
    assert any(v.tag == "CT13" for v in validate(early, inst))


def test_negative_fuel_is_reported(inst):
    sol = hand_solution(inst)
    refuel = np.array(sol.dispatch.refuel)
    refuel[0, 1] = 20.0
    viol = validate(_with_dispatch(sol, refuel=refuel), inst)
    assert any(v.tag == "CT11" for v in viol)


def test_dimension_mismatch_raises(inst):
    sol = hand_solution(inst)
    bad = _with_dispatch(sol, t1_production=np.zeros((2, 6)))
    with pytest.raises(DimensionError):
        validate(bad, inst)


def test_instance_errors_carry_paths():
    with pytest.raises(InstanceError) as err:
        hand_instance(earliest=5, latest=4)
    assert any("earliest" in path for path, _ in err.value.problems)


def test_campaign_masks(inst):
    sched = OutageSchedule(((3,),))
    assert campaign_mask(sched, inst, 0, 0).tolist() == [True, True, False, False, False, False]
    assert campaign_mask(sched, inst, 0, 1).tolist() == [False, False, False, True, True, True]


def test_penalty_shapes():
    assert penalty("count", 4, 4) == 0.0
    assert penalty("count", 2, 5) == 1.0
    assert penalty("linear", 2, 5) == 3.0
    assert penalty("quadratic", 2, 5) == 9.0
    assert penalty("custom", 2, 5, (0.0, 7.0, 1.0)) == 7.0
    with pytest.raises(BaselineError):
        penalty("custom", 2, 5)


def test_stability_against_baseline(inst):
    assert baseline_schedule(inst) == OutageSchedule(((4,),))
    assert stability_cost(OutageSchedule(((3,),)), inst, "linear") == 1.0
    assert stability_cost(OutageSchedule(((4,),)), inst, "count") == 0.0


def test_unscheduled_counts_as_week_after_horizon():
    inst = hand_instance(latest=7)
    assert stability_cost(OutageSchedule(((None,),)), inst, "linear") == 3.0


def test_stretch_envelope():
    prof = StretchProfile(((10.0, 1.0), (5.0, 0.7), (0.0, 0.2)))
    assert prof.envelope(12.0) == 1.0
    assert prof.envelope(10.0) == pytest.approx(1.0)
    assert prof.envelope(7.5) == pytest.approx(0.85)
    assert prof.envelope(0.0) == pytest.approx(0.2)


def test_gap_and_errors():
    assert gap(110.0, 100.0) == pytest.approx(0.1)
    assert gap(90.0, 100.0) == pytest.approx(0.1)
    with pytest.raises(GapError):
        gap(1.0, 0.0)


def test_stats_all_failures():
    st_ = aggregate_stats([2.0, 3.0])
    assert st_.n_failures == 2 and math.isnan(st_.mean_gap)


@given(st.lists(st.floats(0.0, 0.99), min_size=1, max_size=30))
def test_stats_properties(gaps):
    s = aggregate_stats(gaps, (0.5,))
    assert s.n_failures == 0
    assert s.q1 <= s.q2 <= s.q3
    assert min(gaps) - 1e-12 <= s.mean_gap <= max(gaps) + 1e-12
    assert s.n_below[0.5] == sum(g < 0.5 for g in gaps)


@given(st.integers(1, 20), st.integers(1, 20))
def test_schedule_distance_is_symmetric(a, b):
    x, y = OutageSchedule(((a,),)), OutageSchedule(((b,),))
    assert x.distance(y, 20) == y.distance(x, 20) == abs(a - b)
