import pytest

from batches import hand_instance, tiny_instance
from refuelplan.formulation import build_compact
from refuelplan.milp import solve_lp_relaxation
from refuelplan.oracle import feasible_schedules
from refuelplan.preprocessing import (
    InfeasibleInstance,
    fix_from_lp,
    tighten_exact,
    tighten_max_cycle_length,
)


def test_exact_tightening_is_idempotent():
    inst = tiny_instance(21)
    once, rep = tighten_exact(inst)
    twice, rep2 = tighten_exact(once)
    assert twice == once
    assert rep2.changes == []
    assert rep.binaries_after <= rep.binaries_before
    assert not once.restricted


@pytest.mark.parametrize("seed", [3, 11, 23, 31])
def test_exact_tightening_keeps_feasible_set(seed):
    inst = tiny_instance(seed)
    reduced, _ = tighten_exact(inst)
    assert set(feasible_schedules(reduced)) == set(feasible_schedules(inst))


def test_fuel_starved_mandatory_outage_is_infeasible():
    # an anticipation cap of 0 means the initial 30 units must be burnt first,
    # which takes three weeks at 10 per week; the window closes at week 1
    inst = hand_instance(earliest=1, latest=1, stock_max_before_outage=0.0)
    with pytest.raises(InfeasibleInstance):
        tighten_exact(inst)


def test_max_cycle_length_is_heuristic_and_flags():
    inst = tiny_instance(0)
    reduced, rep = tighten_max_cycle_length(inst, 2)
    if rep.changes:
        assert rep.heuristic and reduced.restricted
    for i, k in reduced.outages():
        lo, hi = reduced.window(i, k)
        assert lo <= hi
    with pytest.raises(ValueError):
        tighten_max_cycle_length(inst, 0)


def test_lp_fixing_shrinks_windows_and_flags():
    inst = tiny_instance(26)
    model, vm = build_compact(inst)
    lp = solve_lp_relaxation(model)
    reduced, rep = fix_from_lp(inst, lp.values, vm)
    assert reduced.binary_count() <= inst.binary_count()
    for i, k in inst.outages():
        lo, hi = inst.window(i, k)
        nlo, nhi = reduced.window(i, k)
        assert lo <= nlo <= nhi <= hi
    if rep.changes:
        assert reduced.restricted


def test_report_csv_lists_changes():
    inst = tiny_instance(21)
    _, rep = tighten_exact(inst)
    text = rep.to_csv()
    assert text.splitlines()[0].startswith("unit,cycle")
    assert len(text.splitlines()) == len(rep.changes) + 2
