"""Exhaustive ground truth for tiny instances.

Every window-consistent schedule is enumerated, resource limits are checked
combinatorially, and each survivor gets a dispatch LP assembled here from
scratch (it shares no code with :mod:`refuelplan.formulation`).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import linprog

from .domain import (
    DispatchPlan,
    OutageSchedule,
    ProblemInstance,
    Solution,
    campaign_mask,
    cost_breakdown,
    resource_usage,
    simulate_fuel,
    validate,
)


class OracleLimitExceeded(RuntimeError):
    pass


class OracleInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_schedules: int = 200_000
    lp_time_limit: float = 30.0
    workers: int = 1


@dataclass
class OracleResult:
    solution: Solution | None
    n_candidates: int
    n_feasible: int
    costs: dict[tuple, float] = field(default_factory=dict)  # virtual start rows -> cost


def unit_sequences(instance: ProblemInstance, i: int) -> list[tuple[int | None, ...]]:
    """All window-respecting, non-overlapping start sequences of unit ``i``."""
    u = instance.t2_units[i]
    W = instance.weeks
    out: list[tuple[int | None, ...]] = []

    def rec(k: int, earliest: int, acc: list):
        if k > u.n_cycles:
            out.append(tuple(acc))
            return
        c = u.cycle(k)
        lo, hi = instance.window(i, k)
        for s in range(max(lo, earliest), min(hi, W) + 1):
            rec(k + 1, s + c.duration, acc + [s])
        if hi > W and all(instance.is_optional(i, kk) for kk in range(k, u.n_cycles + 1)):
            out.append(tuple(acc + [None] * (u.n_cycles - k + 1)))

    rec(1, 1, [])
    return out


def candidate_count(instance: ProblemInstance) -> int:
    return math.prod(len(unit_sequences(instance, i)) for i in range(instance.n_t2))


def candidate_schedules(instance: ProblemInstance, limits: OracleLimits | None = None) -> Iterator[OutageSchedule]:
    limits = limits or OracleLimits()
    per_unit = [unit_sequences(instance, i) for i in range(instance.n_t2)]
    n = math.prod(len(s) for s in per_unit)
    if n > limits.max_schedules:
        raise OracleLimitExceeded(
            f"{n} candidate schedules exceed the limit {limits.max_schedules}; use a smaller instance")
    for rows in itertools.product(*per_unit):
        yield OutageSchedule(tuple(rows))


def resources_ok(schedule: OutageSchedule, instance: ProblemInstance, tol: float = 1e-9) -> bool:
    for rc in instance.scheduling_constraints:
        for w in rc.weeks:
            if resource_usage(rc, schedule, instance, w) > rc.capacity[w] + tol:
                return False
    return True


# ---------------------------------------------------------------------------
# dispatch LP


@dataclass
class _Affine:
    coef: np.ndarray
    const: float

    def __add__(self, o):
        return _Affine(self.coef + o.coef, self.const + o.const)

    def scale(self, a: float):
        return _Affine(self.coef * a, self.const * a)

    def shift(self, c: float):
        return _Affine(self.coef.copy(), self.const + c)


def dispatch_lp(schedule: OutageSchedule, instance: ProblemInstance,
                time_limit: float = 30.0) -> tuple[float, DispatchPlan] | None:
    """Cheapest dispatch of a fixed schedule; ``None`` if no dispatch exists."""
    W, F = instance.weeks, instance.F
    n2, n1, K = instance.n_t2, instance.n_t1, instance.max_cycles
    lb, ub, cost = [], [], []
    t1_idx = np.zeros((n1, W), dtype=int)
    for j, u in enumerate(instance.t1_units):
        for w in range(W):
            t1_idx[j, w] = len(lb)
            lb.append(u.p_min[w]); ub.append(u.p_max[w]); cost.append(u.cost[w] * F[w])
    p_idx: dict[tuple[int, int, int], int] = {}
    r_idx: dict[tuple[int, int], int] = {}
    for i, u in enumerate(instance.t2_units):
        last = schedule.last_started(i)
        pmax = instance.t2_pmax[i]
        for k in range(last + 1):
            mask = campaign_mask(schedule, instance, i, k)
            for w in np.flatnonzero(mask):
                if pmax[w] > 0:
                    p_idx[i, k, int(w)] = len(lb)
                    lb.append(0.0); ub.append(pmax[w]); cost.append(0.0)
            if k >= 1:
                c = u.cycle(k)
                r_idx[i, k] = len(lb)
                lb.append(c.refuel_min); ub.append(c.refuel_max); cost.append(c.refuel_cost)
    n = len(lb)
    cost = np.array(cost, dtype=float)
    const_obj = 0.0
    a_ub, b_ub = [], []

    def le(expr: _Affine, bound: float):  # expr <= bound
        a_ub.append(expr.coef); b_ub.append(bound - expr.const)

    def unit(idx: int) -> _Affine:
        v = np.zeros(n); v[idx] = 1.0
        return _Affine(v, 0.0)

    for i, u in enumerate(instance.t2_units):
        last = schedule.last_started(i)
        xs = _Affine(np.zeros(n), u.initial_fuel)
        xe = None
        for k in range(last + 1):
            if k >= 1:
                c = u.cycle(k)
                prev_bo = u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null
                q = c.loss_factor
                le(xe, c.stock_max_before_outage)
                xs = unit(r_idx[i, k]).shift(c.bore_null) + xe.shift(-prev_bo).scale((q - 1.0) / q)
                le(xs, c.stock_max)
            burn = np.zeros(n)
            for (ii, kk, w), idx in p_idx.items():
                if ii == i and kk == k:
                    burn[idx] = F[w]
            xe = _Affine(xs.coef - burn, xs.const)
            le(xe.scale(-1.0), 0.0)
        cost = cost - u.final_fuel_credit * xe.coef
        const_obj -= u.final_fuel_credit * xe.const
    a_eq = np.zeros((W, n))
    for j in range(n1):
        for w in range(W):
            a_eq[w, t1_idx[j, w]] = 1.0
    for (i, k, w), idx in p_idx.items():
        a_eq[w, idx] = 1.0
    b_eq = instance.D.copy()
    res = linprog(cost, A_ub=np.array(a_ub) if a_ub else None, b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=a_eq, b_eq=b_eq, bounds=list(zip(lb, ub)), method="highs",
                  options={"time_limit": time_limit, "primal_feasibility_tolerance": 1e-9,
                           "dual_feasibility_tolerance": 1e-9})
    if res.status != 0:
        if res.status in (2, 3):
            return None
        raise RuntimeError(f"dispatch LP failed: {res.message}")
    x = res.x
    refuel = np.zeros((n2, K + 1))
    p2 = np.zeros((n2, K + 1, W))
    p1 = np.zeros((n1, W))
    for (i, k), idx in r_idx.items():
        refuel[i, k] = x[idx]
    for (i, k, w), idx in p_idx.items():
        p2[i, k, w] = x[idx]
    for j in range(n1):
        p1[j] = x[t1_idx[j]]
    traj = simulate_fuel(schedule, refuel, p2, instance)
    plan = DispatchPlan(refuel, p2, p1, traj.fuel_start, traj.fuel_end, traj.horizon_fuel)
    return float(res.fun + const_obj), plan


# ---------------------------------------------------------------------------
# enumeration


def _virtual_key(schedule: OutageSchedule, W: int) -> tuple:
    return tuple(tuple(W + 1 if s is None else s for s in row) for row in schedule.starts)


def enumerate_optimal(instance: ProblemInstance, limits: OracleLimits | None = None,
                      admit: Callable[[OutageSchedule], bool] | None = None,
                      keep_all: bool = False) -> OracleResult:
    """Minimum-cost feasible schedule among the candidates ``admit`` accepts.

    Ties within 1e-9 relative go to the lexicographically smallest schedule
    (unscheduled outages compare as week ``W + 1``).
    """
    limits = limits or OracleLimits()
    W = instance.weeks
    cands = [s for s in candidate_schedules(instance, limits)
             if (admit is None or admit(s)) and resources_ok(s, instance)]
    n_candidates = candidate_count(instance)

    def run(s):
        return s, dispatch_lp(s, instance, limits.lp_time_limit)

    if limits.workers > 1:
        with ThreadPoolExecutor(limits.workers) as pool:
            results = list(pool.map(run, cands))
    else:
        results = [run(s) for s in cands]
    best = None
    costs = {}
    n_feasible = 0
    for s, res in results:
        if res is None:
            continue
        n_feasible += 1
        val, plan = res
        key = _virtual_key(s, W)
        if keep_all:
            costs[key] = val
        if best is None:
            best = (val, key, s, plan)
            continue
        tol = 1e-9 * max(1.0, abs(best[0]))
        if val < best[0] - tol or (abs(val - best[0]) <= tol and key < best[1]):
            best = (val, key, s, plan)
    if best is None:
        return OracleResult(None, n_candidates, 0, costs)
    _, _, sched, plan = best
    cost = cost_breakdown(plan, instance)
    sol = Solution(sched, plan, cost, meta={"method": "oracle", "status": "optimal"})
    sol = Solution(sched, plan, cost, tuple(validate(sol, instance)), sol.meta)
    return OracleResult(sol, n_candidates, n_feasible, costs)


def feasible_schedules(instance: ProblemInstance, limits: OracleLimits | None = None) -> dict[tuple, float]:
    """Virtual start rows of every feasible schedule, with its optimal dispatch cost."""
    return enumerate_optimal(instance, limits, keep_all=True).costs


def restricted_optimal(instance: ProblemInstance, incumbent: Solution, spec, limits: OracleLimits | None = None,
                       lp_values=None, varmap=None) -> OracleResult:
    """Best schedule inside a neighborhood of ``incumbent``."""
    from .localsearch import admits  # neighborhood semantics live with the restriction code

    pred = admits(spec, incumbent.schedule, instance, lp_values=lp_values, varmap=varmap)
    return enumerate_optimal(instance, limits, admit=pred)


def modifications(schedule: OutageSchedule, baseline: OutageSchedule, W: int) -> int:
    return sum(1 for i, row in enumerate(schedule.starts) for k in range(1, len(row) + 1)
               if schedule.virtual(i, k, W) != baseline.virtual(i, k, W))


def pareto_oracle(instance: ProblemInstance, baseline: OutageSchedule, nmax: int | None = None,
                  limits: OracleLimits | None = None) -> list[tuple[int, float]]:
    """Brute-force (modifications, cost) frontier around ``baseline``."""
    W = instance.weeks
    costs = feasible_schedules(instance, limits)
    bucket: dict[int, float] = {}
    for key, val in costs.items():
        sched = OutageSchedule.from_virtual(key, W)
        n = modifications(sched, baseline, W)
        if nmax is not None and n > nmax:
            continue
        bucket[n] = min(val, bucket.get(n, math.inf))
    front = []
    best = math.inf
    for n in sorted(bucket):
        if bucket[n] < best - 1e-9 * max(1.0, abs(best) if best < math.inf else 1.0):
            front.append((n, bucket[n]))
            best = bucket[n]
    return front
