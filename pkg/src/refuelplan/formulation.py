"""MILP models over an instance: compact, stability, simplified, stage, dispatch, light CT6.

Outage decisions use step binaries ``d[i,k,w] = 1`` iff outage (i, k) starts
at or before week ``w``.  Only weeks inside the start window ``[lo, hi - 1]``
get a variable; ``d`` is the constant 0 before ``lo`` and 1 from ``hi`` on
(``hi == W + 1`` leaves the outage optional).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .domain import (
    TOL,
    BaselineError,
    DispatchPlan,
    OutageSchedule,
    ProblemInstance,
    Solution,
    baseline_schedule,
    cost_breakdown,
    penalty,
    simulate_fuel,
    stability_cost,
    validate,
)
from .milp import LinExpr, Model, ModelError, SolveConfig, SolveOutcome, Var, quicksum, solve

Window = tuple[int, int]


class FormulationError(ValueError):
    pass


@dataclass(frozen=True)
class StabilityObjective:
    shape: str = "count"
    baseline: OutageSchedule | None = None
    financial_weight: float = 1.0


@dataclass(frozen=True)
class StabilityBudget:
    nmax: int
    baseline: OutageSchedule | None = None


@dataclass(frozen=True)
class FormulationOptions:
    demand_sense: str = "equality"  # or "at_least"
    ct6: str = "off"  # off | light_disaggregated | light_aggregated
    stability: StabilityObjective | StabilityBudget | None = None


@dataclass
class VarMap:
    """Handles into a built model, plus the window layout it was built with."""

    instance: ProblemInstance
    windows: dict[tuple[int, int], Window]
    n_cycles: list[int]  # cycles present in the model, per unit
    d: dict[tuple[int, int, int], Var] = field(default_factory=dict)
    r: dict[tuple[int, int], Var] = field(default_factory=dict)
    p: dict[tuple[int, int, int], Var | LinExpr] = field(default_factory=dict)
    t1: dict[tuple[int, int], Var] = field(default_factory=dict)
    xs: dict[tuple[int, int], Var] = field(default_factory=dict)
    xe: dict[tuple[int, int], Var] = field(default_factory=dict)
    xh: dict[int, Var] = field(default_factory=dict)
    slack: dict[tuple[int, int], Var] = field(default_factory=dict)
    delta: dict[tuple[int, int], Var] = field(default_factory=dict)
    xres: dict[tuple[int, int], Var] = field(default_factory=dict)
    delta_cost: float = 0.0
    kind: str = "compact"

    def d_expr(self, i: int, k: int, w: int) -> LinExpr:
        """Step value of outage (i, k) at week ``w``; ``w`` may be 0 or W + 1."""
        W = self.instance.weeks
        if k == 0:
            return LinExpr(const=1.0)
        if k > self.n_cycles[i] or w < 1:
            return LinExpr(const=0.0)
        if w > W:
            return LinExpr(const=1.0)
        lo, hi = self.windows[i, k]
        if w < lo:
            return LinExpr(const=0.0)
        if w >= hi:
            return LinExpr(const=1.0)
        return LinExpr({self.d[i, k, w].index: 1.0})

    def copy(self) -> VarMap:
        out = VarMap(self.instance, dict(self.windows), list(self.n_cycles))
        for name in ("d", "r", "p", "t1", "xs", "xe", "xh", "slack", "delta", "xres"):
            setattr(out, name, dict(getattr(self, name)))
        out.delta_cost = self.delta_cost
        out.kind = self.kind
        return out

    # -- assignments --------------------------------------------------------

    def assignment(self, solution: Solution, model: Model) -> np.ndarray:
        """Full variable vector reproducing ``solution`` in ``model``.

        Cycles the solution leaves unscheduled get zero fuel levels; the
        balance slack absorbs the difference.
        """
        inst = self.instance
        W = inst.weeks
        x = np.zeros(model.num_vars)
        sched, disp = solution.schedule, solution.dispatch
        for (i, k, w), v in self.d.items():
            s = sched.week_of(i, k)
            x[v.index] = 1.0 if s is not None and s <= w else 0.0
        for (i, k), v in self.r.items():
            x[v.index] = disp.refuel[i, k]
        for (i, k, w), v in self.p.items():
            if isinstance(v, Var):
                x[v.index] = disp.t2_production[i, k, w - 1]
        for (j, w), v in self.t1.items():
            x[v.index] = disp.t1_production[j, w - 1]
        traj = simulate_fuel(sched, disp.refuel, disp.t2_production, inst)
        for i, u in enumerate(inst.t2_units):
            last = sched.last_started(i)
            for k in range(self.n_cycles[i] + 1):
                xs = traj.fuel_start[i, k] if k <= last else 0.0
                xe = traj.fuel_end[i, k] if k <= last else 0.0
                x[self.xs[i, k].index] = xs
                x[self.xe[i, k].index] = xe
                if k >= 1 and (i, k) in self.slack:
                    c = u.cycle(k)
                    prev_bo = u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null
                    prev_xe = x[self.xe[i, k - 1].index]
                    q = c.loss_factor
                    rhs = c.bore_null + x[self.r[i, k].index] + (q - 1.0) / q * (prev_xe - prev_bo)
                    x[self.slack[i, k].index] = xs - rhs
            if i in self.xh:
                x[self.xh[i].index] = traj.horizon_fuel[i]
            for w in range(1, W + 1):
                if (i, w) in self.xres:
                    v = self.xres[i, w]
                    x[v.index] = min(max(traj.residual[i, w - 1], model.lb[v.index]), model.ub[v.index])
        return x


# ---------------------------------------------------------------------------
# builders


def _default_windows(instance: ProblemInstance) -> dict[tuple[int, int], Window]:
    return {(i, k): instance.window(i, k) for i, k in instance.outages()}


def pinned_windows(instance: ProblemInstance, schedule: OutageSchedule) -> dict[tuple[int, int], Window]:
    W = instance.weeks
    return {(i, k): (schedule.virtual(i, k, W),) * 2 for i, k in instance.outages()}


def delta_cost_default(instance: ProblemInstance) -> float:
    """Per-fuel penalty of the simplified model's deficit variables."""
    F = instance.F
    worst_t1 = max((c * f for u in instance.t1_units for c, f in zip(u.cost, F)), default=0.0)
    worst_t1 /= float(F.min())
    worst_refuel = max((c.refuel_cost for u in instance.t2_units for c in u.cycles), default=0.0)
    return 10.0 * max(worst_t1, worst_refuel, 1.0)


def _phantom_bound(instance: ProblemInstance, i: int, k: int) -> float:
    u = instance.t2_units[i]
    c = u.cycle(k)
    prev_bo = u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null
    ratio = (1.0 - c.loss_factor) / c.loss_factor
    return c.stock_max + abs(c.bore_null) + ratio * (u.stock_cap + abs(prev_bo)) + 1.0


def _build(instance: ProblemInstance, *, windows: Mapping[tuple[int, int], Window] | None = None,
           max_cycle: int | None = None, credit: bool = True, anticipation_upto: int | None = None,
           simplified: bool = False, delta_cost: float | None = None, demand_sense: str = "equality",
           name: str = "compact") -> tuple[Model, VarMap]:
    inst = instance
    W, F = inst.weeks, inst.F
    wins = _default_windows(inst)
    if windows:
        for key, (lo, hi) in windows.items():
            if key not in wins:
                raise FormulationError(f"window for unknown outage {key}")
            lo0, hi0 = wins[key]
            if lo > hi:
                raise FormulationError(f"outage {key}: empty window [{lo}, {hi}]")
            wins[key] = (lo, hi)
    ncyc = [u.n_cycles if max_cycle is None else min(u.n_cycles, max_cycle) for u in inst.t2_units]
    m = Model(name)
    vm = VarMap(inst, wins, ncyc, kind=name)

    # step binaries and their monotonicity
    for i, u in enumerate(inst.t2_units):
        for k in range(1, ncyc[i] + 1):
            lo, hi = wins[i, k]
            for w in range(max(lo, 1), min(hi, W + 1)):
                vm.d[i, k, w] = m.add_var(f"d[{i},{k},{w}]", binary=True)
            for w in range(max(lo, 1) + 1, min(hi, W + 1)):
                m.add_constr(vm.d[i, k, w - 1], "<=", vm.d[i, k, w], name=f"step[{i},{k},{w}]")
    # outage k+1 may only start once outage k is over
    for i, u in enumerate(inst.t2_units):
        for k in range(1, ncyc[i]):
            da = u.cycle(k).duration
            for w in range(1, W + 1):
                lhs = vm.d_expr(i, k + 1, w)
                rhs = vm.d_expr(i, k, w - da)
                if lhs.is_constant and rhs.is_constant and lhs.const <= rhs.const:
                    continue
                m.add_constr(lhs, "<=", rhs, name=f"seq[{i},{k},{w}]")

    # T1 production
    for j, u in enumerate(inst.t1_units):
        for w in range(1, W + 1):
            vm.t1[j, w] = m.add_var(f"pt1[{j},{w}]", u.p_min[w - 1], u.p_max[w - 1])

    # T2 production by campaign
    for i, u in enumerate(inst.t2_units):
        pmax = inst.t2_pmax[i]
        for k in range(0, ncyc[i] + 1):
            da = 0 if k == 0 else u.cycle(k).duration
            for w in range(1, W + 1):
                cap = (vm.d_expr(i, k, w - da) - vm.d_expr(i, k + 1, w)) * pmax[w - 1]
                if cap.is_constant and cap.const <= 0.0:
                    continue
                if pmax[w - 1] <= 0.0:
                    continue
                if simplified:
                    vm.p[i, k, w] = cap
                elif cap.is_constant:
                    vm.p[i, k, w] = m.add_var(f"p[{i},{k},{w}]", 0.0, cap.const)
                else:
                    v = m.add_var(f"p[{i},{k},{w}]", 0.0)
                    vm.p[i, k, w] = v
                    m.add_constr(v, "<=", cap, name=f"cpl[{i},{k},{w}]")

    # demand
    for w in range(1, W + 1):
        supply = quicksum(vm.t1[j, w] for j in range(inst.n_t1))
        for (i, k, ww), p in vm.p.items():
            if ww == w:
                supply.add(p)
        sense = "==" if demand_sense == "equality" else ">="
        m.add_constr(supply, sense, float(inst.D[w - 1]), name=f"dem[{w}]")

    # fuel
    objective = LinExpr()
    if simplified:
        vm.delta_cost = delta_cost_default(inst) if delta_cost is None else float(delta_cost)
    for i, u in enumerate(inst.t2_units):
        cap = u.stock_cap
        vm.xs[i, 0] = m.add_var(f"xs[{i},0]", u.initial_fuel, u.initial_fuel)
        for k in range(0, ncyc[i] + 1):
            if k >= 1:
                c = u.cycle(k)
                vm.xs[i, k] = m.add_var(f"xs[{i},{k}]", 0.0, c.stock_max)
                vm.r[i, k] = r = m.add_var(f"r[{i},{k}]", 0.0, c.refuel_max)
                scheduled = vm.d_expr(i, k, W)
                m.add_constr(r, ">=", scheduled * c.refuel_min, name=f"rmin[{i},{k}]")
                m.add_constr(r, "<=", scheduled * c.refuel_max, name=f"rmax[{i},{k}]")
                objective.add(r, c.refuel_cost)
            vm.xe[i, k] = m.add_var(f"xe[{i},{k}]", 0.0, cap if k == 0 else u.cycle(k).stock_max)
            burn = quicksum(vm.p[i, k, w] * float(F[w - 1]) for w in range(1, W + 1) if (i, k, w) in vm.p)
            rhs = LinExpr.of(vm.xs[i, k]) - burn
            if simplified:
                vm.delta[i, k] = dv = m.add_var(f"delta[{i},{k}]", 0.0)
                rhs.add(dv)
                objective.add(dv, vm.delta_cost)
            m.add_constr(vm.xe[i, k], "==", rhs, name=f"burn[{i},{k}]")
        for k in range(1, ncyc[i] + 1):
            c = u.cycle(k)
            prev_bo = u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null
            q = c.loss_factor
            bal = LinExpr(const=c.bore_null).add(vm.r[i, k]).add(vm.xe[i, k - 1], (q - 1.0) / q)
            bal.add(-(q - 1.0) / q * prev_bo)
            lo, hi = vm.windows[i, k]
            if hi > W:
                # unscheduled cycles carry no physical fuel; free the balance for them
                big = _phantom_bound(inst, i, k)
                vm.slack[i, k] = s = m.add_var(f"u[{i},{k}]", -big, big)
                bal.add(s)
                m.add_constr(LinExpr.of(s) - (1 - vm.d_expr(i, k, W)) * big, "<=", 0.0, name=f"uhi[{i},{k}]")
                m.add_constr(LinExpr.of(s) + (1 - vm.d_expr(i, k, W)) * big, ">=", 0.0, name=f"ulo[{i},{k}]")
            m.add_constr(vm.xs[i, k], "==", bal, name=f"loss[{i},{k}]")
        # fuel ceiling before each outage
        last_ant = ncyc[i] - 1 if anticipation_upto is None else min(ncyc[i] - 1, anticipation_upto)
        for k in range(0, last_ant + 1):
            a = u.cycle(k + 1).stock_max_before_outage
            s_k = cap if k == 0 else u.cycle(k).stock_max
            nxt = vm.d_expr(i, k + 1, W)
            m.add_constr(vm.xe[i, k], "<=", a + (1 - nxt) * (s_k - a), name=f"ant[{i},{k}]")
        if credit:
            vm.xh[i] = xh = m.add_var(f"xh[{i}]", 0.0, cap)
            for k in range(0, ncyc[i] + 1):
                off = 1 - vm.d_expr(i, k, W) + vm.d_expr(i, k + 1, W)
                m.add_constr(xh, "<=", LinExpr.of(vm.xe[i, k]) + off * cap, name=f"hfuel[{i},{k}]")
            objective.add(xh, -u.final_fuel_credit)

    for j, u in enumerate(inst.t1_units):
        for w in range(1, W + 1):
            objective.add(vm.t1[j, w], float(u.cost[w - 1] * F[w - 1]))

    # shared resources
    for n, rc in enumerate(inst.scheduling_constraints):
        for w in rc.weeks:
            used = LinExpr()
            for unit, k in rc.members:
                i = inst.unit_index[unit]
                if k > ncyc[i]:
                    continue
                inc = rc.increment((unit, k), w)
                if inc:
                    used.add(vm.d_expr(i, k, w), inc)
            if used.terms or used.const:
                m.add_constr(used, "<=", float(rc.capacity[w]), name=f"res[{n},{w}]")

    m.set_objective(objective)
    return m, vm


def build_compact(instance: ProblemInstance, options: FormulationOptions | None = None,
                  windows: Mapping[tuple[int, int], Window] | None = None) -> tuple[Model, VarMap]:
    opts = options or FormulationOptions()
    m, vm = _build(instance, windows=windows, demand_sense=opts.demand_sense)
    if opts.stability is not None:
        m = add_stability(m, vm, opts.stability)
    if opts.ct6 != "off":
        mode = {"light_disaggregated": "disaggregated", "light_aggregated": "aggregated"}.get(opts.ct6, opts.ct6)
        m, vm = add_ct6_light(m, vm, mode)
    return m, vm


def build_simplified(instance: ProblemInstance, slack_cost: float | None = None,
                     windows: Mapping[tuple[int, int], Window] | None = None) -> tuple[Model, VarMap]:
    if slack_cost is not None and slack_cost <= 0:
        raise FormulationError("slack cost must be > 0")
    return _build(instance, windows=windows, simplified=True, delta_cost=slack_cost,
                  demand_sense="at_least", name="simplified")


def build_rrf_stage(instance: ProblemInstance, k0: int,
                    fixed_weeks: Mapping[tuple[int, int], int | None]) -> tuple[Model, VarMap]:
    """Stage ``k0``: cycles ``< k0`` pinned, ``k0`` and ``k0 + 1`` free, later cycles dropped."""
    W = instance.weeks
    wins = {}
    for (i, k), s in fixed_weeks.items():
        if k >= k0:
            continue
        lo, hi = instance.window(i, k)
        v = W + 1 if s is None else s
        if not lo <= v <= hi:
            raise FormulationError(f"fixed week {s} of outage {(i, k)} outside window [{lo}, {hi}]")
        wins[i, k] = (v, v)
    for i, k in instance.outages():
        if k < k0 and (i, k) not in wins and not instance.is_optional(i, k):
            raise FormulationError(f"mandatory outage {(i, k)} is not pinned")
    return _build(instance, windows=wins, max_cycle=k0 + 1, credit=False,
                  anticipation_upto=k0, name=f"stage{k0}")


def build_dispatch_lp(instance: ProblemInstance, schedule: OutageSchedule) -> tuple[Model, VarMap]:
    return _build(instance, windows=pinned_windows(instance, schedule), name="dispatch")


def add_stability(model: Model, vm: VarMap, mode: StabilityObjective | StabilityBudget) -> Model:
    """Copy of ``model`` with a rescheduling objective term or a modification budget."""
    inst = vm.instance
    W = inst.weeks
    base = mode.baseline if mode.baseline is not None else baseline_schedule(inst)
    out = model.copy()
    if isinstance(mode, StabilityBudget):
        if mode.nmax < 0:
            raise FormulationError("Nmax must be >= 0")
        moved = LinExpr()
        for i, k in inst.outages():
            if k > vm.n_cycles[i]:
                continue
            w0 = base.virtual(i, k, W)
            moved.add(1.0).add(vm.d_expr(i, k, w0 - 1)).add(vm.d_expr(i, k, w0), -1.0)
        out.add_constr(moved, "<=", float(mode.nmax), name="budget")
        return out
    if isinstance(mode, StabilityObjective):
        extra = LinExpr()
        for i, u in enumerate(inst.t2_units):
            for k in range(1, vm.n_cycles[i] + 1):
                c = u.cycle(k)
                w0 = base.virtual(i, k, W)
                for w in range(1, W + 2):
                    pen = penalty(mode.shape, w, w0, c.stability_weights)
                    if pen:
                        extra.add(vm.d_expr(i, k, w) - vm.d_expr(i, k, w - 1), pen)
        obj = model.objective * mode.financial_weight
        obj.add(extra)
        out.set_objective(obj, model.sense)
        return out
    raise FormulationError(f"unknown stability mode {mode!r}")


def add_ct6_light(model: Model, vm: VarMap, mode: str = "disaggregated") -> tuple[Model, VarMap]:
    """Residual-fuel variables plus the piecewise upper envelope on T2 production."""
    if mode not in ("disaggregated", "aggregated"):
        raise FormulationError(f"unknown CT6 mode {mode!r}")
    inst = vm.instance
    W, F = inst.weeks, inst.F
    out = model.copy()
    vm = vm.copy()
    for i, u in enumerate(inst.t2_units):
        profiles = {k: u.cycle(k).stretch_profile for k in range(1, vm.n_cycles[i] + 1)
                    if u.cycle(k).stretch_profile is not None}
        if not profiles:
            continue
        if mode == "aggregated" and len({p.points for p in profiles.values()}) > 1:
            raise FormulationError(f"unit {u.id}: aggregated CT6 needs identical profiles across cycles")
        big = u.stock_cap
        for w in range(1, W + 1):
            vm.xres[i, w] = out.add_var(f"xw[{i},{w}]", 0.0, big)
        for k in range(0, vm.n_cycles[i] + 1):
            cum = LinExpr()
            for w in range(1, W + 1):
                if (i, k, w) in vm.p:
                    cum.add(vm.p[i, k, w], float(F[w - 1]))
                off = 1 - vm.d_expr(i, k, w) + vm.d_expr(i, k + 1, w)
                if off.is_constant and off.const >= 1.0:
                    continue
                rhs = LinExpr.of(vm.xs[i, k]) - cum + off * big
                out.add_constr(vm.xres[i, w], "<=", rhs, name=f"res_fuel[{i},{k},{w}]")
        pmax = inst.t2_pmax[i]
        for w in range(1, W + 1):
            if pmax[w - 1] <= 0:
                continue
            if mode == "disaggregated":
                groups = [([k], prof) for k, prof in profiles.items()]
            else:
                groups = [(sorted(profiles), next(iter(profiles.values())))]
            for ks, prof in groups:
                prod = quicksum(vm.p[i, k, w] for k in ks if (i, k, w) in vm.p)
                if not prod.terms:
                    continue
                for m_idx, (slope, f_m, c_m) in enumerate(prof.segments(), start=1):
                    env = (LinExpr.of(vm.xres[i, w]) - f_m) * (slope * pmax[w - 1]) + c_m * pmax[w - 1]
                    out.add_constr(prod, "<=", env, name=f"stretch[{i},{'-'.join(map(str, ks))},{w},{m_idx}]")
    return out, vm


# ---------------------------------------------------------------------------
# extraction


def extract_schedule(values: np.ndarray, vm: VarMap) -> OutageSchedule:
    """Outage starts encoded in an assignment; cycles absent from the model are unscheduled."""
    inst = vm.instance
    W = inst.weeks
    rows = []
    for i, u in enumerate(inst.t2_units):
        row = []
        for k in range(1, u.n_cycles + 1):
            if k > vm.n_cycles[i]:
                row.append(W + 1)
                continue
            lo, hi = vm.windows[i, k]
            raw = np.array([vm.d_expr(i, k, w).value(values) for w in range(1, W + 1)])
            if np.any(raw[:-1] - raw[1:] > 1e-4):
                raise ModelError(f"outage {(i, k)}: step structure broken in assignment")
            step = np.maximum.accumulate(raw >= 0.5)
            hit = np.flatnonzero(step)
            row.append(int(hit[0]) + 1 if hit.size else W + 1)
        rows.append(row)
    return OutageSchedule.from_virtual(rows, W)


def _clean(v: float) -> float:
    return 0.0 if abs(v) < 1e-9 else float(v)


def extract_solution(outcome: SolveOutcome, vm: VarMap, check_ct6: bool = False) -> Solution:
    if outcome.values is None:
        raise FormulationError(f"no primal assignment (status {outcome.status})")
    x = outcome.values
    inst = vm.instance
    n2, K, W = inst.n_t2, inst.max_cycles, inst.weeks
    sched = extract_schedule(x, vm)
    refuel = np.zeros((n2, K + 1))
    p2 = np.zeros((n2, K + 1, W))
    p1 = np.zeros((inst.n_t1, W))
    for (i, k), v in vm.r.items():
        refuel[i, k] = _clean(x[v.index])
    for (i, k, w), v in vm.p.items():
        p2[i, k, w - 1] = _clean(LinExpr.of(v).value(x))
    for (j, w), v in vm.t1.items():
        p1[j, w - 1] = _clean(x[v.index])
    traj = simulate_fuel(sched, refuel, p2, inst)
    xs, xe, xh = traj.fuel_start.copy(), traj.fuel_end.copy(), traj.horizon_fuel.copy()
    for i in range(n2):
        last = sched.last_started(i)
        for k in range(last + 1):
            if (i, k) in vm.xs and vm.kind != "simplified":
                xs[i, k] = x[vm.xs[i, k].index]
                xe[i, k] = x[vm.xe[i, k].index]
        if i in vm.xh and vm.kind != "simplified":
            xh[i] = x[vm.xh[i].index]
    disp = DispatchPlan(refuel, p2, p1, xs, xe, xh)
    slack = sum(vm.delta_cost * max(0.0, x[v.index]) for v in vm.delta.values())
    cost = cost_breakdown(disp, inst, penalty_slack=slack)
    sol = Solution(sched, disp, cost, meta={"status": outcome.status, "model_objective": outcome.objective,
                                            "dual_bound": outcome.dual_bound, "runtime": outcome.runtime})
    viol = validate(sol, inst, check_ct6=check_ct6)
    return Solution(sched, disp, cost, tuple(viol), sol.meta)


def attach_stability(solution: Solution, instance: ProblemInstance, shape: str = "count",
                     baseline: OutageSchedule | None = None) -> Solution:
    try:
        stab = stability_cost(solution.schedule, instance, shape, baseline)
    except BaselineError:
        return solution
    c = solution.cost
    cost = type(c)(c.refuel_cost, c.t1_cost, c.final_fuel_credit, stab, c.penalty_slack)
    return Solution(solution.schedule, solution.dispatch, cost, solution.violations, solution.meta)


def solve_dispatch(instance: ProblemInstance, schedule: OutageSchedule,
                   config: SolveConfig | None = None) -> Solution | None:
    """Optimal dispatch of a fixed schedule, or ``None`` when it admits none."""
    m, vm = build_dispatch_lp(instance, schedule)
    out = solve(m, config or SolveConfig(time_limit=60.0))
    if not out.has_solution:
        return None
    sol = extract_solution(out, vm)
    return sol


def solve_compact(instance: ProblemInstance, config: SolveConfig | None = None,
                  options: FormulationOptions | None = None,
                  windows: Mapping[tuple[int, int], Window] | None = None) -> tuple[SolveOutcome, Solution | None]:
    m, vm = build_compact(instance, options, windows)
    out = solve(m, config or SolveConfig())
    sol = extract_solution(out, vm, check_ct6=(options is not None and options.ct6 != "off")) \
        if out.has_solution else None
    return out, sol
