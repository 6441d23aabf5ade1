"""Cost/stability trade-off around a baseline schedule by bounding the number of moved outages."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

from .constructive import RepairConfig, RepairError, repair
from .domain import OutageSchedule, ProblemInstance, Solution, baseline_schedule
from .formulation import (
    StabilityBudget,
    add_stability,
    attach_stability,
    build_compact,
    extract_solution,
)
from .milp import SolveConfig, solve

log = logging.getLogger(__name__)


class ParetoError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParetoPoint:
    n_modifications: int
    financial: float
    solution: Solution


def moved_outages(schedule: OutageSchedule, baseline: OutageSchedule, weeks: int) -> int:
    return sum(1 for i, row in enumerate(schedule.starts) for k in range(1, len(row) + 1)
               if schedule.virtual(i, k, weeks) != baseline.virtual(i, k, weeks))


def pareto_frontier(instance: ProblemInstance, baseline: OutageSchedule | None = None,
                    n_max: int | None = None, config: SolveConfig | None = None,
                    skipped: list[int] | None = None) -> list[ParetoPoint]:
    """Non-dominated (moved outages, financial cost) points for budgets 0..n_max.

    The solution for budget ``t`` warm-starts budget ``t + 1``.  A point is
    kept only when its cost is strictly below every point with fewer moves;
    its abscissa is the number of outages it actually moves.
    """
    cfg = config or SolveConfig()
    W = instance.weeks
    base = baseline if baseline is not None else baseline_schedule(instance)
    n_outages = sum(1 for _ in instance.outages())
    top = n_outages if n_max is None else min(n_max, n_outages)
    if top < 0:
        raise ParetoError("n_max must be >= 0")
    model, vm = build_compact(instance)
    points: list[ParetoPoint] = []
    warm = None
    any_feasible = False
    for nmax in range(top + 1):
        m = add_stability(model, vm, StabilityBudget(nmax, base))
        out = solve(m, cfg.with_(warmstart=warm))
        if not out.has_solution:
            log.info("budget %d: %s", nmax, out.status)
            if skipped is not None:
                skipped.append(nmax)
            continue
        any_feasible = True
        sol = extract_solution(out, vm)
        sol = attach_stability(sol, instance, "count", base)
        warm = vm.assignment(sol, m)
        moved = moved_outages(sol.schedule, base, W)
        cost = sol.cost.financial
        if points and cost >= points[-1].financial - 1e-9 * max(1.0, abs(points[-1].financial)):
            continue
        sol.meta.update({"method": "pareto", "nmax": nmax})
        points.append(ParetoPoint(moved, cost, sol))
    if not any_feasible:
        try:
            repair(base, instance, RepairConfig(time_limit=cfg.time_limit))
        except RepairError as exc:
            raise ParetoError(f"baseline cannot be repaired: {exc}") from exc
        raise ParetoError("no budget in range admits a feasible schedule")
    return points


def frontier_csv(points: list[ParetoPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_modifications", "financial_cost"])
    for p in points:
        w.writerow([p.n_modifications, repr(float(p.financial))])
    return buf.getvalue()
