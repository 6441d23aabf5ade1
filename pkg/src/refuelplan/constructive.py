"""Constructive matheuristics: simplified MILP, stage-wise relax-and-fix, per-unit merge, and repair."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .domain import (
    OutageSchedule,
    ProblemInstance,
    ResourceConstraint,
    Solution,
    T1Unit,
    baseline_schedule,
    schedule_violations,
)
from .formulation import (
    StabilityObjective,
    add_stability,
    attach_stability,
    build_compact,
    build_rrf_stage,
    build_simplified,
    extract_schedule,
    extract_solution,
    solve_dispatch,
)
from .milp import SolveConfig, solve

log = logging.getLogger(__name__)


class ConstructionError(RuntimeError):
    pass


class StageInfeasible(ConstructionError):
    def __init__(self, stage: int, status: str):
        self.stage = stage
        super().__init__(f"relax-and-fix stage {stage} has no solution ({status})")


class RepairError(ConstructionError):
    pass


@dataclass(frozen=True)
class RepairConfig:
    shape: str = "count"
    radius: int = 5
    epsilon: float | None = None
    time_limit: float = 60.0
    rel_gap: float = 1e-6


def cost_scale(instance: ProblemInstance) -> float:
    """Rough magnitude of any financial objective value of the instance."""
    F = instance.F
    t1 = sum(float(instance.D[w]) * max((u.cost[w] * F[w] for u in instance.t1_units), default=0.0)
             for w in range(instance.weeks))
    refuel = sum(c.refuel_cost * c.refuel_max for u in instance.t2_units for c in u.cycles)
    credit = sum(u.final_fuel_credit * u.stock_cap for u in instance.t2_units)
    return 1.0 + t1 + refuel + credit


def _meta(sol: Solution, method: str, t0: float, **extra) -> Solution:
    sol.meta.update({"method": method, "runtime": time.perf_counter() - t0, **extra})
    return sol


# ---------------------------------------------------------------------------
# repair


def repair(baseline: OutageSchedule, instance: ProblemInstance, config: RepairConfig | None = None) -> Solution:
    """Closest feasible schedule to ``baseline`` (stability first, money second)."""
    cfg = config or RepairConfig()
    t0 = time.perf_counter()
    W = instance.weeks
    eps = cfg.epsilon if cfg.epsilon is not None else 1e-3 / cost_scale(instance)
    centre = {}
    for i, k in instance.outages():
        lo, hi = instance.window(i, k)
        centre[i, k] = min(max(baseline.virtual(i, k, W), lo), hi)
    radius = max(0, cfg.radius)
    while True:
        wins = {}
        full = True
        for (i, k), s in centre.items():
            lo, hi = instance.window(i, k)
            a, b = max(lo, s - radius), min(hi, s + radius)
            full &= (a, b) == (lo, hi)
            wins[i, k] = (a, b)
        model, vm = build_compact(instance, windows=wins)
        model = add_stability(model, vm, StabilityObjective(cfg.shape, baseline, financial_weight=eps))
        remaining = max(1.0, cfg.time_limit - (time.perf_counter() - t0))
        out = solve(model, SolveConfig(time_limit=remaining, rel_gap_tol=cfg.rel_gap, abs_gap_tol=1e-9))
        if out.has_solution:
            sched = extract_schedule(out.values, vm)
            sol = solve_dispatch(instance, sched)
            if sol is None:  # should not happen: the schedule came with a dispatch
                sol = extract_solution(out, vm)
            sol = attach_stability(sol, instance, cfg.shape, baseline)
            return _meta(sol, "repair", t0, radius=radius, status=out.status)
        if full:
            if out.status == "infeasible":
                raise RepairError("no feasible schedule exists within the full windows")
            raise RepairError(f"repair found no solution within the time limit ({out.status})")
        radius = max(1, 2 * radius)


def _finish(schedule: OutageSchedule, instance: ProblemInstance, repair_cfg: RepairConfig | None) -> Solution:
    """Dispatch a schedule; fall back to repair if it is not admissible."""
    if not schedule_violations(schedule, instance):
        sol = solve_dispatch(instance, schedule)
        if sol is not None and sol.feasible:
            return sol
    log.info("schedule needs repair")
    sol = repair(schedule, instance, repair_cfg)
    sol.meta["repaired"] = True
    return sol


# ---------------------------------------------------------------------------
# simplified MILP


def solve_simplified(instance: ProblemInstance, config: SolveConfig | None = None,
                     repair_cfg: RepairConfig | None = None) -> Solution:
    cfg = config or SolveConfig()
    t0 = time.perf_counter()
    model, vm = build_simplified(instance)
    out = solve(model, cfg)
    if not out.has_solution:
        raise ConstructionError(f"simplified model has no solution ({out.status})")
    sched = extract_schedule(out.values, vm)
    sol = _finish(sched, instance, repair_cfg)
    return _meta(sol, "simplified", t0, simplified_objective=out.objective)


# ---------------------------------------------------------------------------
# relax-and-fix


def solve_rrf(instance: ProblemInstance, config: SolveConfig | None = None) -> Solution:
    """Fix outages cycle by cycle; each stage sees one cycle ahead and drops the rest."""
    cfg = config or SolveConfig()
    t0 = time.perf_counter()
    K = instance.max_cycles
    W = instance.weeks
    fixed: dict[tuple[int, int], int | None] = {}
    budget = cfg.time_limit
    for k0 in range(1, K):
        remaining = budget - (time.perf_counter() - t0)
        limit = max(0.5, remaining / (K - k0 + 1))
        model, vm = build_rrf_stage(instance, k0, fixed)
        out = solve(model, cfg.with_(time_limit=limit, warmstart=None))
        if not out.has_solution:
            raise StageInfeasible(k0, out.status)
        sched = extract_schedule(out.values, vm)
        for i, u in enumerate(instance.t2_units):
            if k0 <= u.n_cycles:
                fixed[i, k0] = sched.week_of(i, k0)
    pins = {}
    for (i, k), s in fixed.items():
        v = W + 1 if s is None else s
        pins[i, k] = (v, v)
    model, vm = build_compact(instance, windows=pins)
    remaining = max(0.5, budget - (time.perf_counter() - t0))
    out = solve(model, cfg.with_(time_limit=remaining, warmstart=None))
    if not out.has_solution:
        raise StageInfeasible(K, out.status)
    sol = extract_solution(out, vm)
    return _meta(sol, "rrf", t0, status=out.status)


# ---------------------------------------------------------------------------
# per-unit construction and merge


def share_factors(instance: ProblemInstance) -> np.ndarray:
    """Weekly fraction of the fleet's T2 capacity held by each unit, shape (n_t2, W)."""
    pm = instance.t2_pmax
    total = pm.sum(axis=0)
    return np.where(total > 0, pm / np.where(total > 0, total, 1.0), 1.0 / instance.n_t2)


def unit_subinstance(instance: ProblemInstance, i: int) -> ProblemInstance:
    """Unit ``i`` alone, facing its power share of demand and of T1 capacity."""
    share = share_factors(instance)[i]
    u = instance.t2_units[i]
    t1 = tuple(T1Unit(t.id, tuple(float(a * s) for a, s in zip(t.p_min, share)),
                      tuple(float(a * s) for a, s in zip(t.p_max, share)), t.cost) for t in instance.t1_units)
    rcs = []
    for rc in instance.scheduling_constraints:
        members = tuple(m for m in rc.members if m[0] == u.id)
        if members:
            cons = {key: v for key, v in rc.consumption.items() if key[0] == u.id}
            rcs.append(ResourceConstraint(rc.id, members, rc.weeks, cons, dict(rc.capacity)))
    demand = tuple(float(d * s) for d, s in zip(instance.demand, share))
    return replace(instance, demand=demand, t1_units=t1, t2_units=(u,), scheduling_constraints=tuple(rcs),
                   name=f"{instance.name}#{u.id}")


def solve_cmsa(instance: ProblemInstance, config: SolveConfig | None = None,
               repair_cfg: RepairConfig | None = None) -> Solution:
    cfg = config or SolveConfig()
    t0 = time.perf_counter()
    n = instance.n_t2
    try:
        fallback = baseline_schedule(instance)
    except Exception:
        fallback = None
    rows = []
    for i in range(n):
        sub = unit_subinstance(instance, i)
        remaining = cfg.time_limit - (time.perf_counter() - t0)
        limit = max(0.5, remaining / (n - i + 1))
        model, vm = build_compact(sub)
        out = solve(model, cfg.with_(time_limit=limit, warmstart=None))
        if out.has_solution:
            rows.append(extract_schedule(out.values, vm).starts[0])
        else:
            log.info("unit %s subproblem: %s", instance.t2_units[i].id, out.status)
            if fallback is not None:
                rows.append(fallback.starts[i])
            else:
                rows.append(tuple(instance.window(i, k)[0] for k in range(1, instance.t2_units[i].n_cycles + 1)))
    merged = OutageSchedule(tuple(rows))
    rcfg = repair_cfg or RepairConfig(time_limit=max(1.0, cfg.time_limit - (time.perf_counter() - t0)))
    sol = _finish(merged, instance, rcfg)
    return _meta(sol, "cmsa", t0)
