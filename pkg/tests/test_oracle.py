import pytest

from batches import hand_instance, tiny_instance
from refuelplan.domain import OutageSchedule
from refuelplan.instance_io import GeneratorConfig, generate
from refuelplan.oracle import (
    OracleLimitExceeded,
    OracleLimits,
    candidate_count,
    dispatch_lp,
    enumerate_optimal,
    pareto_oracle,
    unit_sequences,
)


def test_hand_instance_sequences():
    inst = hand_instance()
    assert unit_sequences(inst, 0) == [(3,), (4,)]


def test_optional_outage_adds_skip_branch():
    inst = hand_instance(latest=7)
    seqs = unit_sequences(inst, 0)
    assert (None,) in seqs and len(seqs) == 5


def test_hand_dispatch_cost():
    inst = hand_instance()
    cost, plan = dispatch_lp(OutageSchedule(((3,),)), inst)
    # full nuclear output needs a refuel of at least 32.5; any extra refuel is
    # paid and credited back at the same unit price, so the optimum is 52.5
    assert plan.t1_production[0, 2] == pytest.approx(10.0)
    assert cost == pytest.approx(52.5)


def test_single_candidate_instance():
    inst = generate(GeneratorConfig(seed=5, n_t2=2, n_cycles=2, weeks=20, tw_width=0))
    res = enumerate_optimal(inst)
    assert res.n_candidates == 1
    assert res.n_feasible in (0, 1)


def test_limit_is_enforced():
    inst = tiny_instance(1)
    with pytest.raises(OracleLimitExceeded):
        enumerate_optimal(inst, OracleLimits(max_schedules=candidate_count(inst) - 1))


def test_parallel_enumeration_is_order_independent():
    inst = tiny_instance(2)
    one = enumerate_optimal(inst)
    two = enumerate_optimal(inst, OracleLimits(workers=2))
    assert one.solution.schedule == two.solution.schedule
    assert one.solution.objective == pytest.approx(two.solution.objective)


def test_oracle_solution_is_clean():
    res = enumerate_optimal(tiny_instance(4))
    assert res.solution.feasible


def test_pareto_oracle_is_decreasing():
    from refuelplan.domain import baseline_schedule

    inst = tiny_instance(0)
    front = pareto_oracle(inst, baseline_schedule(inst))
    ns = [n for n, _ in front]
    costs = [c for _, c in front]
    assert ns == sorted(ns)
    assert all(b < a for a, b in zip(costs, costs[1:]))
