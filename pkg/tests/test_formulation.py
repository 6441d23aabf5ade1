import numpy as np
import pytest

from batches import hand_instance, tiny_instance
from refuelplan.domain import baseline_schedule, schedule_violations, validate
from refuelplan.formulation import (
    FormulationError,
    FormulationOptions,
    StabilityBudget,
    StabilityObjective,
    add_stability,
    build_compact,
    build_rrf_stage,
    build_simplified,
    extract_schedule,
    extract_solution,
    solve_compact,
    solve_dispatch,
)
from refuelplan.milp import SolveConfig, solve
from refuelplan.oracle import dispatch_lp, enumerate_optimal

EXACT = SolveConfig(rel_gap_tol=1e-9, abs_gap_tol=1e-9)


def test_binaries_follow_windows():
    inst = tiny_instance(4)
    _, vm = build_compact(inst)
    assert len(vm.d) == inst.binary_count()


def test_hand_instance_matches_oracle():
    inst = hand_instance()
    _, sol = solve_compact(inst, EXACT)
    ref = enumerate_optimal(inst).solution
    assert sol.objective == pytest.approx(ref.objective, rel=1e-9)
    assert validate(sol, inst) == []


def test_step_variables_encode_the_start_week():
    inst = tiny_instance(6)
    out, sol = solve_compact(inst, EXACT)
    _, vm = build_compact(inst)
    x = vm.assignment(sol, build_compact(inst)[0])
    for (i, k, w), var in vm.d.items():
        s = sol.schedule.virtual(i, k, inst.weeks)
        assert x[var.index] == (1.0 if s <= w else 0.0)


@pytest.mark.parametrize("seed", [0, 5, 9])
def test_fixed_schedule_dispatch_matches_independent_lp(seed):
    inst = tiny_instance(seed)
    sched = baseline_schedule(inst)
    ours = solve_dispatch(inst, sched, EXACT)
    ref = dispatch_lp(sched, inst)
    assert (ours is None) == (ref is None)
    if ref is not None:
        assert ours.objective == pytest.approx(ref[0], rel=1e-7)


def test_zero_budget_keeps_the_baseline():
    inst = tiny_instance(2)
    base = baseline_schedule(inst)
    if solve_dispatch(inst, base) is None:
        pytest.skip("baseline has no dispatch")
    m, vm = build_compact(inst)
    out = solve(add_stability(m, vm, StabilityBudget(0, base)), EXACT)
    assert extract_schedule(out.values, vm) == base


def test_stability_objective_prefers_baseline_when_money_is_negligible():
    inst = tiny_instance(2)
    base = baseline_schedule(inst)
    if solve_dispatch(inst, base) is None:
        pytest.skip("baseline has no dispatch")
    m, vm = build_compact(inst)
    out = solve(add_stability(m, vm, StabilityObjective("linear", base, financial_weight=1e-9)), EXACT)
    assert extract_schedule(out.values, vm) == base


def test_at_least_demand_is_a_relaxation():
    inst = tiny_instance(8)
    _, eq = solve_compact(inst, EXACT)
    out, _ = solve_compact(inst, EXACT, FormulationOptions(demand_sense="at_least"))
    assert out.objective <= eq.objective + 1e-6


def test_simplified_model_gives_admissible_schedule():
    inst = tiny_instance(10)
    m, vm = build_simplified(inst)
    out = solve(m, EXACT)
    assert out.has_solution
    assert schedule_violations(extract_schedule(out.values, vm), inst) == []


def test_rrf_stage_respects_fixed_weeks():
    inst = tiny_instance(12)
    base = baseline_schedule(inst)
    fixed = {(i, 1): base.week_of(i, 1) for i in range(inst.n_t2)}
    m, vm = build_rrf_stage(inst, 2, fixed)
    out = solve(m, EXACT)
    if out.has_solution:
        sched = extract_schedule(out.values, vm)
        assert all(sched.week_of(i, 1) == fixed[i, 1] for i in range(inst.n_t2))


def test_ct6_solution_respects_envelope_and_costs_more():
    inst = tiny_instance(3, stretch_profiles=True)
    _, free = solve_compact(inst, EXACT)
    _, ct6 = solve_compact(inst, EXACT, FormulationOptions(ct6="light_disaggregated"))
    assert validate(ct6, inst, check_ct6=True) == []
    assert ct6.objective >= free.objective - 1e-6


def test_aggregated_ct6_requires_shared_profiles():
    from dataclasses import replace

    from refuelplan.domain import StretchProfile

    inst = tiny_instance(0, stretch_profiles=True)
    u = inst.t2_units[0]
    c2 = u.cycle(2)
    odd = replace(c2, stretch_profile=StretchProfile(((c2.bore_null, 1.0), (0.0, 0.5))))
    inst2 = replace(inst, t2_units=(replace(u, cycles=(u.cycle(1), odd)),) + inst.t2_units[1:])
    with pytest.raises(FormulationError):
        build_compact(inst2, FormulationOptions(ct6="light_aggregated"))


def test_extracted_solution_is_validator_clean():
    inst = tiny_instance(14)
    m, vm = build_compact(inst)
    out = solve(m, EXACT)
    sol = extract_solution(out, vm)
    assert sol.feasible
    assert np.isclose(sol.objective, out.objective, rtol=1e-7)
