"""JSON formats for instances and solutions, the seeded generator, and derived instances."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .domain import (
    CostBreakdown,
    CycleSpec,
    DispatchPlan,
    InstanceError,
    OutageSchedule,
    ProblemInstance,
    ResourceConstraint,
    Solution,
    StretchProfile,
    T1Unit,
    T2Unit,
    cost_breakdown,
    simulate_fuel,
)


class FormatError(ValueError):
    """Syntax or structure problem in a document; carries a field path or position."""

    def __init__(self, message: str, path: str = "", line: int | None = None, column: int | None = None):
        self.path, self.line, self.column = path, line, column
        where = path or (f"line {line}, column {column}" if line is not None else "")
        super().__init__(f"{where}: {message}" if where else message)


# ---------------------------------------------------------------------------
# instance documents


def _req(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise FormatError("expected an object", path)
    if key not in obj:
        raise FormatError(f"missing field {key!r}", f"{path}.{key}" if path else key)
    return obj[key]


def _floats(v, path: str) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise FormatError("expected a list of numbers", path)
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise FormatError("expected a list of numbers", path) from None


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError("expected a number", path)
    return float(v)


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
        raise FormatError("expected an integer", path)
    return int(v)


def _cycle(obj: dict, path: str) -> CycleSpec:
    g = lambda k: _req(obj, k, path)  # noqa: E731
    prof = obj.get("stretch_profile")
    weights = obj.get("stability_weights")
    base = obj.get("baseline_week")
    return CycleSpec(
        duration=_int(g("duration"), f"{path}.duration"),
        earliest=_int(g("earliest"), f"{path}.earliest"),
        latest=_int(g("latest"), f"{path}.latest"),
        refuel_min=_num(g("refuel_min"), f"{path}.refuel_min"),
        refuel_max=_num(g("refuel_max"), f"{path}.refuel_max"),
        refuel_cost=_num(g("refuel_cost"), f"{path}.refuel_cost"),
        loss_factor=_num(g("loss_factor"), f"{path}.loss_factor"),
        bore_null=_num(g("bore_null"), f"{path}.bore_null"),
        stock_max=_num(g("stock_max"), f"{path}.stock_max"),
        stock_max_before_outage=_num(g("stock_max_before_outage"), f"{path}.stock_max_before_outage"),
        baseline_week=None if base is None else _int(base, f"{path}.baseline_week"),
        stability_weights=None if weights is None else _floats(weights, f"{path}.stability_weights"),
        stretch_profile=None if prof is None else StretchProfile(
            tuple((_num(f, f"{path}.stretch_profile"), _num(c, f"{path}.stretch_profile")) for f, c in prof)),
    )


def instance_from_dict(doc: dict) -> ProblemInstance:
    weeks = _int(_req(doc, "weeks", ""), "weeks")
    t1 = []
    for j, u in enumerate(_req(doc, "t1_units", "")):
        p = f"t1_units[{j}]"
        t1.append(T1Unit(str(_req(u, "id", p)), _floats(_req(u, "p_min", p), f"{p}.p_min"),
                         _floats(_req(u, "p_max", p), f"{p}.p_max"), _floats(_req(u, "cost", p), f"{p}.cost")))
    t2 = []
    for i, u in enumerate(_req(doc, "t2_units", "")):
        p = f"t2_units[{i}]"
        cycles = tuple(_cycle(c, f"{p}.cycles[{k}]") for k, c in enumerate(_req(u, "cycles", p)))
        t2.append(T2Unit(str(_req(u, "id", p)), _floats(_req(u, "p_max", p), f"{p}.p_max"),
                         _num(_req(u, "initial_fuel", p), f"{p}.initial_fuel"),
                         _num(_req(u, "initial_bore_null", p), f"{p}.initial_bore_null"),
                         _num(_req(u, "final_fuel_credit", p), f"{p}.final_fuel_credit"), cycles))
    rcs = []
    for n, rc in enumerate(doc.get("scheduling_constraints", [])):
        p = f"scheduling_constraints[{n}]"
        members = tuple((str(a), _int(b, f"{p}.members")) for a, b in _req(rc, "members", p))
        cons = {}
        for key, v in _req(rc, "consumption", p).items():
            parts = key.rsplit(",", 2)
            if len(parts) != 3:
                raise FormatError(f"bad key {key!r}, expected 'unit,cycle,week'", f"{p}.consumption")
            cons[parts[0], int(parts[1]), int(parts[2])] = _num(v, f"{p}.consumption[{key}]")
        cap = {int(k): _num(v, f"{p}.capacity[{k}]") for k, v in _req(rc, "capacity", p).items()}
        weeks_c = tuple(_int(w, f"{p}.weeks") for w in _req(rc, "weeks", p))
        rcs.append(ResourceConstraint(str(rc.get("id", f"c{n}")), members, weeks_c, cons, cap))
    meta = doc.get("meta", {})
    return ProblemInstance(
        weeks=weeks,
        demand=_floats(_req(doc, "demand", ""), "demand"),
        fuel_factor=_floats(_req(doc, "fuel_factor", ""), "fuel_factor"),
        t1_units=tuple(t1), t2_units=tuple(t2), scheduling_constraints=tuple(rcs),
        name=str(doc.get("name", "")), restricted=bool(meta.get("restricted", False)),
    )


def parse_instance(text: str) -> ProblemInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise FormatError("top level must be an object", line=1, column=1)
    return instance_from_dict(doc)


def instance_to_dict(inst: ProblemInstance) -> dict:
    def cyc(c: CycleSpec) -> dict:
        out: dict[str, Any] = {
            "duration": c.duration, "earliest": c.earliest, "latest": c.latest,
            "refuel_min": c.refuel_min, "refuel_max": c.refuel_max, "refuel_cost": c.refuel_cost,
            "loss_factor": c.loss_factor, "bore_null": c.bore_null, "stock_max": c.stock_max,
            "stock_max_before_outage": c.stock_max_before_outage,
        }
        if c.baseline_week is not None:
            out["baseline_week"] = c.baseline_week
        if c.stability_weights is not None:
            out["stability_weights"] = list(c.stability_weights)
        if c.stretch_profile is not None:
            out["stretch_profile"] = [list(pt) for pt in c.stretch_profile.points]
        return out

    doc: dict[str, Any] = {"name": inst.name, "weeks": inst.weeks, "demand": list(inst.demand),
                           "fuel_factor": list(inst.fuel_factor)}
    if inst.restricted:
        doc["meta"] = {"restricted": True}
    doc["t1_units"] = [{"id": u.id, "p_min": list(u.p_min), "p_max": list(u.p_max), "cost": list(u.cost)}
                       for u in inst.t1_units]
    doc["t2_units"] = [{"id": u.id, "p_max": list(u.p_max), "initial_fuel": u.initial_fuel,
                        "initial_bore_null": u.initial_bore_null, "final_fuel_credit": u.final_fuel_credit,
                        "cycles": [cyc(c) for c in u.cycles]} for u in inst.t2_units]
    doc["scheduling_constraints"] = [{
        "id": rc.id,
        "members": [[a, k] for a, k in rc.members],
        "weeks": list(rc.weeks),
        "consumption": {f"{a},{k},{w}": v for (a, k, w), v in sorted(rc.consumption.items())},
        "capacity": {str(w): v for w, v in sorted(rc.capacity.items())},
    } for rc in inst.scheduling_constraints]
    return doc


def write_instance(inst: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


# ---------------------------------------------------------------------------
# solution documents


def solution_to_dict(sol: Solution, instance: ProblemInstance) -> dict:
    sched = {f"{u.id},{k}": sol.schedule.week_of(i, k) for i, k in instance.outages()
             for u in [instance.t2_units[i]]}
    d = sol.dispatch
    doc = {
        "schedule": sched,
        "refuel": {f"{u.id},{k}": float(d.refuel[i, k]) for i, k in instance.outages()
                   for u in [instance.t2_units[i]]},
        "t1_production": {u.id: [float(v) for v in d.t1_production[j]] for j, u in enumerate(instance.t1_units)},
        "t2_production": {f"{u.id},{k}": [float(v) for v in d.t2_production[i, k]]
                          for i, u in enumerate(instance.t2_units) for k in range(u.n_cycles + 1)
                          if np.any(d.t2_production[i, k])},
        "costs": {"financial": sol.cost.financial, "refuel_cost": sol.cost.refuel_cost,
                  "t1_cost": sol.cost.t1_cost, "final_fuel_credit": sol.cost.final_fuel_credit,
                  "stability": sol.cost.stability, "penalty_slack": sol.cost.penalty_slack},
        "violations": [str(v) for v in sol.violations],
    }
    if sol.meta:
        doc["run"] = {k: v for k, v in sol.meta.items() if isinstance(v, (str, int, float, bool)) or v is None}
    return doc


def write_solution(sol: Solution, instance: ProblemInstance) -> str:
    return json.dumps(solution_to_dict(sol, instance), indent=1) + "\n"


def parse_solution(text: str, instance: ProblemInstance) -> Solution:
    """Read a solution document; fuel levels are recomputed from refuels and productions."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    n2, K, W = instance.n_t2, instance.max_cycles, instance.weeks
    rows = []
    sched_doc = _req(doc, "schedule", "")
    for i, u in enumerate(instance.t2_units):
        row = []
        for k in range(1, u.n_cycles + 1):
            key = f"{u.id},{k}"
            if key not in sched_doc:
                raise FormatError(f"missing outage {key!r}", f"schedule.{key}")
            v = sched_doc[key]
            row.append(None if v is None else _int(v, f"schedule.{key}"))
        rows.append(tuple(row))
    sched = OutageSchedule(tuple(rows))
    refuel = np.zeros((n2, K + 1))
    for key, v in doc.get("refuel", {}).items():
        uid, k = key.rsplit(",", 1)
        refuel[instance.unit_index[uid], int(k)] = float(v)
    p2 = np.zeros((n2, K + 1, W))
    for key, v in doc.get("t2_production", {}).items():
        uid, k = key.rsplit(",", 1)
        vals = _floats(v, f"t2_production.{key}")
        if len(vals) != W:
            raise FormatError(f"length {len(vals)} != weeks {W}", f"t2_production.{key}")
        p2[instance.unit_index[uid], int(k)] = vals
    p1 = np.zeros((instance.n_t1, W))
    t1_ids = {u.id: j for j, u in enumerate(instance.t1_units)}
    for uid, v in doc.get("t1_production", {}).items():
        if uid not in t1_ids:
            raise FormatError(f"unknown T1 unit {uid!r}", f"t1_production.{uid}")
        p1[t1_ids[uid]] = _floats(v, f"t1_production.{uid}")
    traj = simulate_fuel(sched, refuel, p2, instance)
    disp = DispatchPlan(refuel, p2, p1, traj.fuel_start, traj.fuel_end, traj.horizon_fuel)
    costs = doc.get("costs", {})
    cost = cost_breakdown(disp, instance, float(costs.get("stability", 0.0)), float(costs.get("penalty_slack", 0.0)))
    return Solution(sched, disp, cost, meta=dict(doc.get("run", {})))


# ---------------------------------------------------------------------------
# generator


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    n_t2: int = 2
    n_t1: int = 2
    n_cycles: int = 2
    weeks: int = 20
    tw_width: int = 2
    seasonal_amplitude: float = 0.25
    base_level: float = 1.35
    cost_spread: float = 1.0
    n_resource_constraints: int = 0
    optional_tail: bool = False
    stretch_profiles: bool = False
    name: str = ""

    def __post_init__(self):
        for f in ("n_t2", "n_t1", "n_cycles", "weeks"):
            if getattr(self, f) < 1:
                raise GeneratorError(f"{f} must be >= 1")
        if self.tw_width < 0:
            raise GeneratorError("tw_width must be >= 0")
        if self.n_resource_constraints < 0:
            raise GeneratorError("n_resource_constraints must be >= 0")


def _durations(cfg: GeneratorConfig) -> tuple[int, int]:
    return (1, 2) if cfg.weeks < 40 else (2, 4)


def generate(cfg: GeneratorConfig) -> ProblemInstance:
    """Seeded random instance built around a known feasible schedule.

    Outages are placed at a regular pace; fuel data are then chosen so that
    running every T2 unit at full power between them is admissible, windows
    are centred on the placed starts and resource capacities admit them.
    """
    W, K = cfg.weeks, cfg.n_cycles
    dmin, dmax = _durations(cfg)
    if K * (dmax + 1) + 1 > W:
        raise GeneratorError(f"{K} cycles with outages up to {dmax} weeks do not fit in {W} weeks")
    rng = np.random.default_rng(cfg.seed)
    F = np.round(1.0 + rng.uniform(-0.05, 0.05, W), 4)
    span = (W - 1) // K
    t2, starts_all = [], []
    for i in range(cfg.n_t2):
        pmax = float(rng.integers(40, 81))
        durations = [int(rng.integers(dmin, dmax + 1)) for _ in range(K)]
        starts, prev_end = [], 1
        for k in range(1, K + 1):
            nominal = 1 + k * span - int(rng.integers(0, max(1, span // 3)))
            s = max(prev_end + 1, 2, min(nominal, W - durations[k - 1]))
            starts.append(s)
            prev_end = s + durations[k - 1]
        starts_all.append(starts)
        full = []  # fuel burnt at full power in each campaign of the plan
        for k in range(K + 1):
            begin = 1 if k == 0 else starts[k - 1] + durations[k - 1]
            end = starts[k] if k < K else W + 1
            full.append(float(sum(F[w - 1] * pmax for w in range(begin, end))))
        gate = [round(float(pmax * rng.uniform(1.5, 3.0)), 2) for _ in range(K)]
        bore = [round(float(pmax * rng.uniform(0.5, 1.5)), 2) for _ in range(K + 1)]
        xi = round(full[0] + 0.5 * gate[0], 2)
        xe_prev = xi - full[0]
        cycles = []
        for k in range(1, K + 1):
            q = round(float(rng.uniform(0.95, 0.99)), 4)
            leftover = 0.5 * gate[k] if k < K else float(pmax * rng.uniform(0.5, 2.0))
            carry = (q - 1.0) / q * (xe_prev - bore[k - 1])
            r_star = max(full[k] + leftover - bore[k] - carry, 1.0)
            rmin, rmax = round(0.7 * r_star, 2), round(1.2 * r_star, 2)
            x_start = bore[k] + r_star + carry
            stock = round(max(1.3 * (bore[k] + rmax + abs(carry)), gate[k - 1]) + 10.0, 2)
            lo = max(1, starts[k - 1] - cfg.tw_width // 2)
            hi = W + 1 if cfg.optional_tail and k == K else min(lo + cfg.tw_width, W)
            cycles.append(CycleSpec(
                duration=durations[k - 1], earliest=lo, latest=max(hi, lo),
                refuel_min=rmin, refuel_max=rmax,
                refuel_cost=round(float(rng.uniform(4.0, 8.0)) * cfg.cost_spread, 3),
                loss_factor=q, bore_null=bore[k], stock_max=stock, stock_max_before_outage=gate[k - 1],
                baseline_week=starts[k - 1],
            ))
            xe_prev = x_start - full[k]
        mean_cr = float(np.mean([c.refuel_cost for c in cycles]))
        u = T2Unit(f"N{i + 1}", tuple([pmax] * W), xi, bore[0], round(0.8 * mean_cr, 3), tuple(cycles))
        t2.append(_with_profiles(u) if cfg.stretch_profiles else u)
    pmax_total = sum(u.p_max[0] for u in t2)
    weeks = np.arange(W)
    season = cfg.base_level + cfg.seasonal_amplitude * np.cos(2 * math.pi * weeks / 52.0)
    demand = np.round(pmax_total * (season + rng.uniform(0.0, 0.03, W)), 2)
    winter = 1.0 + 0.4 * np.maximum(0.0, np.cos(2 * math.pi * weeks / 52.0))
    t1 = []
    for j in range(cfg.n_t1):
        pmx = tuple(float(math.ceil(v / cfg.n_t1 + 1.0)) for v in demand)
        base = float(rng.uniform(20.0, 60.0)) * cfg.cost_spread
        t1.append(T1Unit(f"T{j + 1}", tuple([0.0] * W), pmx, tuple(float(round(base * m, 3)) for m in winter)))
    rcs = _resource_constraints(cfg, rng, t2, starts_all, W)
    return ProblemInstance(W, tuple(float(v) for v in demand), tuple(float(v) for v in F), tuple(t1),
                           tuple(t2), tuple(rcs), name=cfg.name or f"gen_s{cfg.seed}")


def _with_profiles(u: T2Unit) -> T2Unit:
    # one breakpoint per unit, so every cycle carries the same profile
    bo = max(max(c.bore_null for c in u.cycles), 1.0)
    prof = StretchProfile(((bo, 1.0), (bo / 2.0, 0.7), (0.0, 0.2)))
    return replace(u, cycles=tuple(replace(c, bore_null=bo, stretch_profile=prof) for c in u.cycles))


def _resource_constraints(cfg, rng, t2, starts_all, W) -> list[ResourceConstraint]:
    out = []
    n2 = len(t2)
    if n2 < 2:
        return out
    for n in range(cfg.n_resource_constraints):
        size = int(rng.integers(2, min(3, n2) + 1))
        units = sorted(rng.choice(n2, size=size, replace=False).tolist())
        k = int(rng.integers(1, cfg.n_cycles + 1))
        members = tuple((t2[i].id, k) for i in units)
        lo = min(t2[i].cycle(k).earliest for i in units)
        hi = max(min(t2[i].cycle(k).latest, W) for i in units)
        weeks = tuple(range(max(1, lo), min(W, hi) + 1))
        cons = {}
        for i in units:
            for w in range(1, W + 1):
                cons[t2[i].id, k, w] = float(w)
        # capacity: the number of members the planned schedule has started by week w, plus a little slack
        cap = {}
        for w in weeks:
            started = sum(1 for i in units if starts_all[i][k - 1] <= w)
            cap[w] = float(started + int(rng.integers(0, 2)))
        out.append(ResourceConstraint(f"R{n + 1}", members, weeks, cons, cap))
    return out


# ---------------------------------------------------------------------------
# derivation


def derive_ext(instance: ProblemInstance, k0: int) -> ProblemInstance:
    """Remove the windows of every cycle after ``k0``: earliest becomes the physical one, latest open."""
    if k0 < 0:
        raise ValueError("K0 must be >= 0")
    if all(u.n_cycles <= k0 for u in instance.t2_units):
        return instance
    early = physical_earliest_ext(instance, k0)
    W = instance.weeks
    units = []
    for i, u in enumerate(instance.t2_units):
        cycles = []
        for k, c in enumerate(u.cycles, start=1):
            if k > k0:
                c = replace(c, earliest=early[i, k], latest=W + 1)
            cycles.append(c)
        units.append(replace(u, cycles=tuple(cycles)))
    return replace(instance, t2_units=tuple(units), name=f"{instance.name}_ext{k0}")


def physical_earliest_ext(instance: ProblemInstance, k0: int) -> dict[tuple[int, int], int]:
    from .preprocessing import earliest_starts

    return earliest_starts(instance, open_from=k0 + 1)


def derive_truncate(instance: ProblemInstance, k_keep: int, w_keep: int) -> ProblemInstance:
    if k_keep < 1 or w_keep < 1:
        raise ValueError("truncation sizes must be >= 1")
    W = min(instance.weeks, w_keep)
    units = []
    kept: dict[str, int] = {}
    for u in instance.t2_units:
        cycles = []
        for k, c in enumerate(u.cycles[:k_keep], start=1):
            if c.earliest > W:
                break
            latest = c.latest if c.latest <= W else W + 1
            base = c.baseline_week if c.baseline_week is None or c.baseline_week <= W else W + 1
            weights = c.stability_weights
            if weights is not None:
                weights = tuple(weights[:W]) if len(weights) > W else weights
            cycles.append(replace(c, latest=latest, baseline_week=base, stability_weights=weights))
        kept[u.id] = len(cycles)
        units.append(replace(u, p_max=u.p_max[:W], cycles=tuple(cycles)))
    rcs = []
    for rc in instance.scheduling_constraints:
        members = tuple(m for m in rc.members if m[1] <= kept.get(m[0], 0))
        weeks = tuple(w for w in rc.weeks if w <= W)
        if not members or not weeks:
            continue
        cons = {key: v for key, v in rc.consumption.items() if (key[0], key[1]) in members}
        rcs.append(ResourceConstraint(rc.id, members, weeks, cons, {w: rc.capacity[w] for w in weeks}))
    t1 = tuple(replace(u, p_min=u.p_min[:W], p_max=u.p_max[:W], cost=u.cost[:W]) for u in instance.t1_units)
    return ProblemInstance(W, instance.demand[:W], instance.fuel_factor[:W], t1, tuple(units), tuple(rcs),
                           name=f"{instance.name}_{k_keep}_{w_keep}", restricted=instance.restricted)
