"""Seeded instance batches shared by the test modules."""
from __future__ import annotations

from refuelplan.instance_io import GeneratorConfig, generate
from refuelplan.oracle import candidate_count

TINY_CANDIDATE_CAP = 500


def tiny_config(seed: int, **over) -> GeneratorConfig:
    n_t2 = 3 if seed % 4 == 3 else 2
    cycles = 1 if n_t2 == 3 and seed % 8 == 7 else 2
    base = dict(seed=seed, n_t2=n_t2, n_t1=1 + seed % 2, n_cycles=cycles, weeks=20 + 2 * (seed % 6),
                tw_width=2 + seed % 4, n_resource_constraints=seed % 3, optional_tail=seed % 5 == 1,
                name=f"tiny{seed:03d}")
    base.update(over)
    return GeneratorConfig(**base)


def tiny_instance(seed: int, **over):
    """Tiny instance; the window width shrinks until the oracle has few enough candidates."""
    cfg = tiny_config(seed, **over)
    while True:
        inst = generate(cfg)
        if candidate_count(inst) <= TINY_CANDIDATE_CAP or cfg.tw_width == 0:
            return inst
        cfg = GeneratorConfig(**{**cfg.__dict__, "tw_width": cfg.tw_width - 1})


def tiny_batch(n: int = 50, **over):
    return [tiny_instance(s, **over) for s in range(n)]


def medium_instance(seed: int, **over):
    base = dict(seed=1000 + seed, n_t2=10, n_t1=2, n_cycles=3, weeks=60, tw_width=6,
                n_resource_constraints=2, name=f"medium{seed:02d}")
    base.update(over)
    return generate(GeneratorConfig(**base))


def medium_batch(n: int = 20, **over):
    return [medium_instance(s, **over) for s in range(n)]


def hand_instance(**cycle_over):
    """One T2 unit with one outage, one T1 unit, six weeks, unit fuel factors."""
    from refuelplan.domain import CycleSpec, ProblemInstance, T1Unit, T2Unit

    W = 6
    cyc = dict(duration=1, earliest=3, latest=4, refuel_min=0.0, refuel_max=40.0, refuel_cost=1.0,
               loss_factor=0.8, bore_null=0.0, stock_max=100.0, stock_max_before_outage=100.0, baseline_week=4)
    cyc.update(cycle_over)
    t2 = T2Unit("A", (10.0,) * W, 30.0, 0.0, 1.0, (CycleSpec(**cyc),))
    t1 = T1Unit("G", (0.0,) * W, (20.0,) * W, (2.0,) * W)
    return ProblemInstance(W, (10.0,) * W, (1.0,) * W, (t1,), (t2,), name="hand")


def hand_solution(instance):
    """Outage in week 3, full nuclear output otherwise, refuel 40: financial cost 52.5."""
    import numpy as np

    from refuelplan.domain import DispatchPlan, OutageSchedule, Solution, cost_breakdown, simulate_fuel

    sched = OutageSchedule(((3,),))
    refuel = np.array([[0.0, 40.0]])
    p2 = np.zeros((1, 2, 6))
    p2[0, 0, :2] = 10.0
    p2[0, 1, 3:] = 10.0
    p1 = np.zeros((1, 6))
    p1[0, 2] = 10.0
    traj = simulate_fuel(sched, refuel, p2, instance)
    plan = DispatchPlan(refuel, p2, p1, traj.fuel_start, traj.fuel_end, traj.horizon_fuel)
    return Solution(sched, plan, cost_breakdown(plan, instance))
