"""MILP-neighborhood descent around an incumbent schedule.

A neighborhood is a restriction of the compact model that the incumbent
still satisfies: variable fixings on the step binaries, or one extra
distance row.  The descent warm-starts every restricted solve with the
incumbent and adopts strict improvements only.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import OutageSchedule, ProblemInstance, Solution
from .formulation import FormulationOptions, VarMap, build_compact, extract_solution
from .milp import LinExpr, Model, SolveConfig, solve, solve_lp_relaxation

log = logging.getLogger(__name__)


class RestrictionError(RuntimeError):
    """The incumbent does not satisfy a restricted model it should satisfy."""


# ---------------------------------------------------------------------------
# neighborhoods


@dataclass(frozen=True, kw_only=True)
class NeighborhoodSpec:
    time_limit: float = 10.0
    rel_gap: float = 1e-4

    @property
    def label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True, kw_only=True)
class Rins(NeighborhoodSpec):
    time_limit: float = 30.0


@dataclass(frozen=True, kw_only=True)
class LocalBranching(NeighborhoodSpec):
    k: int
    time_limit: float = 30.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")

    @property
    def label(self) -> str:
        return f"LB({self.k})"


@dataclass(frozen=True, kw_only=True)
class Units(NeighborhoodSpec):
    units: tuple[int, ...]
    time_limit: float = 5.0

    def __post_init__(self):
        if not self.units:
            raise ValueError("unit set must be nonempty")

    @property
    def label(self) -> str:
        return f"Units({','.join(map(str, self.units))})"


@dataclass(frozen=True, kw_only=True)
class Cycles(NeighborhoodSpec):
    k_lo: int
    k_hi: int

    def __post_init__(self):
        if self.k_lo > self.k_hi:
            raise ValueError("k_lo must be <= k_hi")

    @property
    def label(self) -> str:
        return f"Cycles({self.k_lo},{self.k_hi})"


@dataclass(frozen=True, kw_only=True)
class TimeWindow(NeighborhoodSpec):
    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("a and b must be >= 0")

    @property
    def label(self) -> str:
        return f"TW({self.a},{self.b})"


def start_ranges(spec: NeighborhoodSpec, incumbent: OutageSchedule,
                 instance: ProblemInstance) -> dict[tuple[int, int], tuple[int, int]] | None:
    """Allowed virtual start interval per outage, or ``None`` for neighborhoods that are not range-based."""
    W = instance.weeks
    out = {}
    for i, k in instance.outages():
        s0 = incumbent.virtual(i, k, W)
        if isinstance(spec, TimeWindow):
            delta = spec.a * k + spec.b
            out[i, k] = (s0 - delta, s0 + delta)
        elif isinstance(spec, Units):
            out[i, k] = (1, W + 1) if i in spec.units else (s0, s0)
        elif isinstance(spec, Cycles):
            out[i, k] = (1, W + 1) if spec.k_lo <= k <= spec.k_hi else (s0, s0)
        else:
            return None
    return out


def rins_fixings(vm: VarMap, lp_values: np.ndarray, incumbent: OutageSchedule,
                 tol: float = 1e-6) -> dict[tuple[int, int, int], int]:
    """Step binaries whose relaxation value equals the incumbent's."""
    fixed = {}
    for (i, k, w), v in vm.d.items():
        s = incumbent.week_of(i, k)
        inc = 1 if s is not None and s <= w else 0
        if abs(lp_values[v.index] - inc) <= tol:
            fixed[i, k, w] = inc
    return fixed


def admits(spec: NeighborhoodSpec, incumbent: OutageSchedule, instance: ProblemInstance,
           lp_values: np.ndarray | None = None, varmap: VarMap | None = None) -> Callable[[OutageSchedule], bool]:
    """Schedule-level membership test of the neighborhood (used by the oracle)."""
    W = instance.weeks
    ranges = start_ranges(spec, incumbent, instance)
    if ranges is not None:
        def in_ranges(s: OutageSchedule) -> bool:
            return all(a <= s.virtual(i, k, W) <= b for (i, k), (a, b) in ranges.items())
        return in_ranges
    if isinstance(spec, LocalBranching):
        return lambda s: s.distance(incumbent, W) <= spec.k
    if isinstance(spec, Rins):
        if lp_values is None or varmap is None:
            raise ValueError("Rins membership needs the relaxation values and the variable map")
        fixed = rins_fixings(varmap, lp_values, incumbent)

        def agrees(s: OutageSchedule) -> bool:
            for (i, k, w), v in fixed.items():
                st = s.week_of(i, k)
                if (1 if st is not None and st <= w else 0) != v:
                    return False
            return True
        return agrees
    raise ValueError(f"unknown neighborhood {spec!r}")


def restrict(model: Model, vm: VarMap, incumbent: Solution, spec: NeighborhoodSpec,
             lp_values: np.ndarray | None = None, check: bool = True) -> Model:
    """Copy of ``model`` restricted to the neighborhood of ``incumbent``."""
    inst = vm.instance
    W = inst.weeks
    out = model.copy(f"{model.name}:{spec.label}")
    sched = incumbent.schedule
    ranges = start_ranges(spec, sched, inst)
    if ranges is not None:
        for (i, k, w), v in vm.d.items():
            a, b = ranges[i, k]
            if w < a:
                out.fix(v, 0.0)
            elif w >= b:
                out.fix(v, 1.0)
    elif isinstance(spec, LocalBranching):
        dist = LinExpr()
        for (i, k, w), v in vm.d.items():
            if out.lb[v.index] == out.ub[v.index]:
                continue
            if w >= sched.virtual(i, k, W):
                dist.add(1.0).add(v, -1.0)
            else:
                dist.add(v)
        out.add_constr(dist, "<=", float(spec.k), name="local_branching")
    elif isinstance(spec, Rins):
        if lp_values is None:
            lp = solve_lp_relaxation(model, SolveConfig(time_limit=spec.time_limit))
            if not lp.has_solution:
                raise RestrictionError(f"relaxation has no solution ({lp.status})")
            lp_values = lp.values
        for (i, k, w), val in rins_fixings(vm, lp_values, sched).items():
            out.fix(vm.d[i, k, w], float(val))
    else:
        raise ValueError(f"unknown neighborhood {spec!r}")
    if check:
        x = vm.assignment(incumbent, out)
        viol = out.max_violation(x)
        if viol > 1e-6:
            raise RestrictionError(f"incumbent violates {spec.label} restriction by {viol:.3g}")
    return out


# ---------------------------------------------------------------------------
# partitions and policies


def _components(instance: ProblemInstance) -> list[list[int]]:
    parent = list(range(instance.n_t2))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for rc in instance.scheduling_constraints:
        idx = sorted({instance.unit_index[u] for u, _ in rc.members})
        for other in idx[1:]:
            ra, rb = find(idx[0]), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(instance.n_t2):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def popmusic_partitions(instance: ProblemInstance, kind: str = "per_unit", min_size: int = 1,
                        time_limit: float | None = None) -> list[NeighborhoodSpec]:
    extra = {} if time_limit is None else {"time_limit": time_limit}
    if kind == "per_unit":
        return [Units(units=(i,), **extra) for i in range(instance.n_t2)]
    if kind == "per_cycle":
        return [Cycles(k_lo=k, k_hi=k, **extra) for k in range(1, instance.max_cycles + 1)]
    if kind == "per_site":
        groups: list[list[int]] = []
        for comp in _components(instance):
            if groups and len(groups[-1]) < min_size:
                groups[-1].extend(comp)
            else:
                groups.append(list(comp))
        if len(groups) > 1 and len(groups[-1]) < min_size:
            groups[-2].extend(groups.pop())
        return [Units(units=tuple(sorted(g)), **extra) for g in groups]
    raise ValueError(f"unknown partition kind {kind!r}")


@dataclass
class SequencePolicy:
    specs: list[NeighborhoodSpec]
    stopping: str = "all_local_min"  # or max_iterations / wallclock
    max_iterations: int | None = None
    wallclock: float | None = None

    def __post_init__(self):
        if not self.specs:
            raise ValueError("policy needs at least one neighborhood")
        if self.stopping not in ("all_local_min", "max_iterations", "wallclock"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")


def default_policy(instance: ProblemInstance, unit_subset: int = 5, seed: int | None = None,
                   stopping: str = "all_local_min", wallclock: float | None = None) -> SequencePolicy:
    """TimeWindow(1,3), one Cycles(k,k) per cycle, then unit subsets."""
    specs: list[NeighborhoodSpec] = [TimeWindow(a=1, b=3)]
    specs += popmusic_partitions(instance, "per_cycle")
    if seed is None:
        specs += popmusic_partitions(instance, "per_site", min_size=unit_subset)
    else:
        order = np.random.default_rng(seed).permutation(instance.n_t2).tolist()
        for n in range(0, len(order), unit_subset):
            specs.append(Units(units=tuple(sorted(order[n:n + unit_subset]))))
    return SequencePolicy(specs, stopping=stopping, wallclock=wallclock)


# ---------------------------------------------------------------------------
# descent


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    neighborhood: str
    status: str
    obj_before: float
    obj_after: float
    seconds: float


@dataclass
class DescentTrace:
    records: list[TraceRecord] = field(default_factory=list)
    certified: bool = False

    def objectives(self) -> list[float]:
        return [r.obj_after for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "neighborhood", "obj_before", "obj_after", "seconds", "status"])
        for r in self.records:
            w.writerow([r.iteration, r.neighborhood, repr(float(r.obj_before)), repr(float(r.obj_after)),
                        f"{r.seconds:.4f}", r.status])
        return buf.getvalue()


@dataclass
class VNDConfig:
    options: FormulationOptions | None = None
    abs_tol: float = 1e-6
    rel_tol: float = 1e-9
    seed: int = 0
    check_incumbent: bool = True
    gap_override: float | None = None


def _improvement_tol(obj: float, cfg: VNDConfig) -> float:
    return max(cfg.abs_tol, cfg.rel_tol * abs(obj))


def vnd(instance: ProblemInstance, initial: Solution, policy: SequencePolicy,
        config: VNDConfig | None = None, model: tuple[Model, VarMap] | None = None) -> tuple[Solution, DescentTrace]:
    """Round-robin descent over the policy's neighborhoods.

    With ``stopping="all_local_min"`` the loop ends after a full rotation
    without improvement, which certifies a local optimum for each of them.
    An initial solution that violates the model (e.g. after adding
    constraints) is accepted: the first feasible neighborhood outcome then
    replaces it.
    """
    cfg = config or VNDConfig()
    base, vm = model if model is not None else build_compact(instance, cfg.options)
    ct6 = bool(vm.xres)
    inc = initial
    inc_x = vm.assignment(inc, base)
    inc_ok = base.max_violation(inc_x) <= 1e-6
    inc_obj = base.objective_value(inc_x) if inc_ok else math.inf
    trace = DescentTrace()
    n = len(policy.specs)
    streak = 0
    it = 0
    t_start = time.perf_counter()
    lp_cache: dict[int, np.ndarray] = {}
    while True:
        if policy.max_iterations is not None and it >= policy.max_iterations:
            break
        elapsed = time.perf_counter() - t_start
        if policy.wallclock is not None and elapsed >= policy.wallclock:
            break
        spec = policy.specs[it % n]
        t0 = time.perf_counter()
        lp_values = None
        if isinstance(spec, Rins):
            key = id(inc)
            if key not in lp_cache:
                lp_cache.clear()
                lp = solve_lp_relaxation(base, SolveConfig(time_limit=spec.time_limit, seed=cfg.seed))
                lp_cache[key] = lp.values if lp.has_solution else None
            lp_values = lp_cache[key]
        limit = spec.time_limit
        if policy.wallclock is not None:
            limit = max(0.05, min(limit, policy.wallclock - elapsed))
        status = "error"
        before = new_obj = inc_obj
        try:
            if isinstance(spec, Rins) and lp_values is None:
                raise RestrictionError("no relaxation values")
            restricted = restrict(base, vm, inc, spec, lp_values, check=cfg.check_incumbent and inc_ok)
            gap = spec.rel_gap if cfg.gap_override is None else cfg.gap_override
            out = solve(restricted, SolveConfig(time_limit=limit, rel_gap_tol=gap, seed=cfg.seed,
                                                warmstart=inc_x if inc_ok else None))
            status = out.status
            if out.has_solution:
                cand = extract_solution(out, vm, check_ct6=ct6)
                cand_x = vm.assignment(cand, base)
                cand_obj = base.objective_value(cand_x)
                feasible = cand.feasible and base.max_violation(cand_x) <= 1e-6
                if feasible and (not inc_ok or cand_obj < inc_obj - _improvement_tol(inc_obj, cfg)):
                    cand.meta["method"] = "vnd"
                    inc, inc_x, inc_obj, inc_ok = cand, cand_x, cand_obj, True
                    new_obj = cand_obj
                    status = f"{status}:improved"
        except RestrictionError as exc:
            log.warning("neighborhood %s skipped: %s", spec.label, exc)
            status = "restriction_error"
        except Exception as exc:  # backend failure: record and move on
            log.warning("neighborhood %s failed: %s", spec.label, exc)
            status = f"error:{type(exc).__name__}"
        seconds = time.perf_counter() - t0
        trace.records.append(TraceRecord(it, spec.label, status, before, new_obj, seconds))
        it += 1
        if status.endswith(":improved"):
            streak = 0
        else:
            streak += 1
        if policy.stopping == "all_local_min" and streak >= n:
            trace.certified = all(r.status == "optimal" for r in trace.records[-n:])
            break
    return inc, trace


def certify_local_optimum(instance: ProblemInstance, solution: Solution, specs: Sequence[NeighborhoodSpec],
                          config: VNDConfig | None = None) -> list[tuple[str, float]]:
    """Re-solve each neighborhood once around ``solution``; list the ones that still improve."""
    cfg = config or VNDConfig()
    base, vm = build_compact(instance, cfg.options)
    x = vm.assignment(solution, base)
    obj = base.objective_value(x)
    improving = []
    for spec in specs:
        lp_values = None
        if isinstance(spec, Rins):
            lp_values = solve_lp_relaxation(base).values
        restricted = restrict(base, vm, solution, spec, lp_values)
        gap = spec.rel_gap if cfg.gap_override is None else cfg.gap_override
        out = solve(restricted, SolveConfig(time_limit=spec.time_limit, rel_gap_tol=gap, warmstart=x, seed=cfg.seed))
        if out.has_solution:
            cand = extract_solution(out, vm)
            cand_obj = base.objective_value(vm.assignment(cand, base))
            if cand.feasible and cand_obj < obj - _improvement_tol(obj, cfg):
                improving.append((spec.label, obj - cand_obj))
    return improving


def run_pipeline(instance: ProblemInstance, time_limit: float = 300.0, seed: int = 0,
                 options: FormulationOptions | None = None,
                 policy: SequencePolicy | None = None) -> tuple[Solution, DescentTrace]:
    """Per-unit construction followed by the descent; the budget is split 1:3."""
    from .constructive import solve_cmsa

    t0 = time.perf_counter()
    start = solve_cmsa(instance, SolveConfig(time_limit=max(1.0, time_limit / 4), seed=seed))
    pol = policy or default_policy(instance)
    remaining = max(1.0, time_limit - (time.perf_counter() - t0))
    if pol.wallclock is None or pol.wallclock > remaining:
        pol = SequencePolicy(pol.specs, stopping=pol.stopping, max_iterations=pol.max_iterations, wallclock=remaining)
    best, trace = vnd(instance, start, pol, VNDConfig(options=options, seed=seed))
    best.meta.update({"method": "pipeline", "runtime": time.perf_counter() - t0,
                      "start_objective": start.objective})
    return best, trace
