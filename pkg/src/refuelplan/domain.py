"""Problem data, solutions, and solver-independent evaluation.

Weeks are 1-based throughout. An outage start of ``None`` means the outage
is not scheduled inside the horizon; for every distance or penalty
computation such an outage is treated as starting at week ``W + 1``.

Arrays inside :class:`DispatchPlan` are indexed ``[unit, cycle, week - 1]``
with cycle 0 being the initial production campaign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

NOT_SCHEDULED = None

#: Absolute tolerance on power and fuel balance checks.
TOL = 1e-6


class InstanceError(ValueError):
    """Invariant violations on instance data, each reported with a field path."""

    def __init__(self, problems: Sequence[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid instance:\n  " + "\n  ".join(lines))


class DimensionError(ValueError):
    pass


class BaselineError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instance types


@dataclass(frozen=True)
class StretchProfile:
    """Piecewise-linear production envelope below the bore-null fuel level.

    ``points`` are ``(fuel, fraction)`` pairs with strictly decreasing fuel,
    the first one at the bore-null level with fraction 1.
    """

    points: tuple[tuple[float, float], ...]

    def segments(self):
        """Yield ``(slope, f_m, c_m)`` for m = 1..Np."""
        for (f0, c0), (f1, c1) in zip(self.points, self.points[1:]):
            yield (c0 - c1) / (f0 - f1), f1, c1

    def envelope(self, fuel: float) -> float:
        """Maximal production fraction at the given residual fuel."""
        if fuel >= self.points[0][0]:
            return 1.0
        return min(slope * (fuel - f) + c for slope, f, c in self.segments())


@dataclass(frozen=True)
class CycleSpec:
    duration: int
    earliest: int
    latest: int
    refuel_min: float
    refuel_max: float
    refuel_cost: float
    loss_factor: float
    bore_null: float
    stock_max: float
    stock_max_before_outage: float
    baseline_week: int | None = None
    stability_weights: tuple[float, ...] | None = None
    stretch_profile: StretchProfile | None = None


@dataclass(frozen=True)
class T1Unit:
    id: str
    p_min: tuple[float, ...]
    p_max: tuple[float, ...]
    cost: tuple[float, ...]


@dataclass(frozen=True)
class T2Unit:
    id: str
    p_max: tuple[float, ...]
    initial_fuel: float
    initial_bore_null: float
    final_fuel_credit: float
    cycles: tuple[CycleSpec, ...]

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    def cycle(self, k: int) -> CycleSpec:
        """Cycle ``k`` (1-based)."""
        return self.cycles[k - 1]

    @property
    def stock_cap(self) -> float:
        """Upper bound on any fuel level of the unit (big-M of the horizon-fuel link)."""
        return max([self.initial_fuel] + [c.stock_max for c in self.cycles])


@dataclass(frozen=True)
class ResourceConstraint:
    """Capacity limit on the resource profiles of a set of outages.

    ``consumption`` holds cumulative values keyed ``(unit_id, cycle, week)``.
    Weeks without a key carry the previous cumulative value forward, and the
    value before week 1 is 0.  The resource used at week ``w`` by a member
    that started at or before ``w`` is the difference of the cumulative
    profile between ``w`` and ``w - 1``.
    """

    id: str
    members: tuple[tuple[str, int], ...]
    weeks: tuple[int, ...]
    consumption: Mapping[tuple[str, int, int], float]
    capacity: Mapping[int, float]

    @cached_property
    def _profiles(self) -> dict[tuple[str, int], list[tuple[int, float]]]:
        out: dict[tuple[str, int], list[tuple[int, float]]] = {m: [] for m in self.members}
        for (u, k, w), v in self.consumption.items():
            out.setdefault((u, k), []).append((w, v))
        for pts in out.values():
            pts.sort()
        return out

    def cumulative(self, member: tuple[str, int], week: int) -> float:
        value = 0.0
        for w, v in self._profiles.get(member, ()):
            if w > week:
                break
            value = v
        return value

    def increment(self, member: tuple[str, int], week: int) -> float:
        return self.cumulative(member, week) - self.cumulative(member, week - 1)


@dataclass(frozen=True)
class ProblemInstance:
    weeks: int
    demand: tuple[float, ...]
    fuel_factor: tuple[float, ...]
    t1_units: tuple[T1Unit, ...]
    t2_units: tuple[T2Unit, ...]
    scheduling_constraints: tuple[ResourceConstraint, ...] = ()
    name: str = ""
    restricted: bool = False

    def __post_init__(self):
        problems = check_instance(self)
        if problems:
            raise InstanceError(problems)

    @property
    def n_t1(self) -> int:
        return len(self.t1_units)

    @property
    def n_t2(self) -> int:
        return len(self.t2_units)

    @cached_property
    def max_cycles(self) -> int:
        return max((u.n_cycles for u in self.t2_units), default=0)

    @cached_property
    def unit_index(self) -> dict[str, int]:
        return {u.id: i for i, u in enumerate(self.t2_units)}

    def window(self, i: int, k: int) -> tuple[int, int]:
        """Admissible starts ``[lo, hi]`` of outage (i, k); ``hi == W + 1`` allows skipping."""
        c = self.t2_units[i].cycle(k)
        return c.earliest, min(c.latest, self.weeks + 1)

    def is_optional(self, i: int, k: int) -> bool:
        return self.t2_units[i].cycle(k).latest > self.weeks

    def outages(self) -> Iterable[tuple[int, int]]:
        for i, u in enumerate(self.t2_units):
            for k in range(1, u.n_cycles + 1):
                yield i, k

    @cached_property
    def F(self) -> np.ndarray:
        return np.asarray(self.fuel_factor, dtype=float)

    @cached_property
    def D(self) -> np.ndarray:
        return np.asarray(self.demand, dtype=float)

    @cached_property
    def t2_pmax(self) -> np.ndarray:
        return np.array([u.p_max for u in self.t2_units], dtype=float).reshape(self.n_t2, self.weeks)

    def binary_count(self) -> int:
        """Free outage binaries of the compact model: sum of window widths."""
        return sum(hi - lo for lo, hi in (self.window(i, k) for i, k in self.outages()))


def _cycle_problems(path: str, c: CycleSpec, weeks: int) -> list[tuple[str, str]]:
    out = []
    if c.duration < 1:
        out.append((f"{path}.duration", "must be >= 1"))
    if c.earliest < 1:
        out.append((f"{path}.earliest", "must be >= 1"))
    if c.earliest > c.latest:
        out.append((f"{path}.earliest", f"earliest {c.earliest} > latest {c.latest}"))
    if not 0 <= c.refuel_min <= c.refuel_max:
        out.append((f"{path}.refuel_min", "need 0 <= refuel_min <= refuel_max"))
    if not 0 < c.loss_factor < 1:
        out.append((f"{path}.loss_factor", "must lie strictly between 0 and 1"))
    if not 0 <= c.stock_max_before_outage <= c.stock_max:
        out.append((f"{path}.stock_max_before_outage", "need 0 <= value <= stock_max"))
    if c.bore_null > c.stock_max:
        out.append((f"{path}.bore_null", "must not exceed stock_max"))
    if c.baseline_week is not None and not 1 <= c.baseline_week <= weeks + 1:
        out.append((f"{path}.baseline_week", f"must lie in [1, {weeks + 1}]"))
    if c.stability_weights is not None and len(c.stability_weights) not in (weeks, weeks + 1):
        out.append((f"{path}.stability_weights", f"length must be {weeks} or {weeks + 1}"))
    prof = c.stretch_profile
    if prof is not None:
        pts = prof.points
        if len(pts) < 2:
            out.append((f"{path}.stretch_profile", "needs at least two points"))
        else:
            fs = [f for f, _ in pts]
            cs = [v for _, v in pts]
            if any(a <= b for a, b in zip(fs, fs[1:])):
                out.append((f"{path}.stretch_profile", "fuel levels must be strictly decreasing"))
            if any(a < b for a, b in zip(cs, cs[1:])) or not all(0 <= v <= 1 for v in cs):
                out.append((f"{path}.stretch_profile", "fractions must be non-increasing in [0, 1]"))
            if cs[0] != 1.0 or not math.isclose(fs[0], c.bore_null):
                out.append((f"{path}.stretch_profile", "first point must be (bore_null, 1)"))
    return out


def check_instance(inst: ProblemInstance) -> list[tuple[str, str]]:
    """Every invariant violation of ``inst`` as ``(path, message)`` pairs."""
    W = inst.weeks
    out: list[tuple[str, str]] = []
    if W < 1:
        return [("weeks", "must be >= 1")]
    if len(inst.demand) != W:
        out.append(("demand", f"length {len(inst.demand)} != weeks {W}"))
    elif any(d < 0 for d in inst.demand):
        out.append(("demand", "values must be >= 0"))
    if len(inst.fuel_factor) != W:
        out.append(("fuel_factor", f"length {len(inst.fuel_factor)} != weeks {W}"))
    elif any(f <= 0 for f in inst.fuel_factor):
        out.append(("fuel_factor", "values must be > 0"))
    ids = set()
    for j, u in enumerate(inst.t1_units):
        p = f"t1_units[{j}]"
        for name in ("p_min", "p_max", "cost"):
            if len(getattr(u, name)) != W:
                out.append((f"{p}.{name}", f"length must be {W}"))
        if len(u.p_min) == W and len(u.p_max) == W:
            if any(not 0 <= a <= b for a, b in zip(u.p_min, u.p_max)):
                out.append((f"{p}.p_min", "need 0 <= p_min <= p_max every week"))
        if u.id in ids:
            out.append((f"{p}.id", f"duplicate id {u.id!r}"))
        ids.add(u.id)
    t2_cycles = {}
    for i, u in enumerate(inst.t2_units):
        p = f"t2_units[{i}]"
        if len(u.p_max) != W:
            out.append((f"{p}.p_max", f"length must be {W}"))
        elif any(v < 0 for v in u.p_max):
            out.append((f"{p}.p_max", "values must be >= 0"))
        if u.initial_fuel < 0:
            out.append((f"{p}.initial_fuel", "must be >= 0"))
        if u.id in ids:
            out.append((f"{p}.id", f"duplicate id {u.id!r}"))
        ids.add(u.id)
        t2_cycles[u.id] = u.n_cycles
        for k, c in enumerate(u.cycles, start=1):
            out.extend(_cycle_problems(f"{p}.cycles[{k - 1}]", c, W))
    for n, rc in enumerate(inst.scheduling_constraints):
        p = f"scheduling_constraints[{n}]"
        for unit, k in rc.members:
            if unit not in t2_cycles or not 1 <= k <= t2_cycles[unit]:
                out.append((f"{p}.members", f"unknown outage ({unit}, {k})"))
        for w in rc.weeks:
            if not 1 <= w <= W:
                out.append((f"{p}.weeks", f"week {w} outside [1, {W}]"))
            elif w not in rc.capacity:
                out.append((f"{p}.capacity", f"missing capacity for week {w}"))
        members = set(rc.members)
        for unit, k, w in rc.consumption:
            if (unit, k) not in members:
                out.append((f"{p}.consumption", f"key ({unit}, {k}, {w}) is not a member"))
    return out


# ---------------------------------------------------------------------------
# decisions


@dataclass(frozen=True)
class OutageSchedule:
    """Start week (or ``None``) per unit and cycle: ``starts[i][k - 1]``."""

    starts: tuple[tuple[int | None, ...], ...]

    def week_of(self, i: int, k: int) -> int | None:
        return self.starts[i][k - 1]

    def virtual(self, i: int, k: int, weeks: int) -> int:
        s = self.starts[i][k - 1]
        return weeks + 1 if s is None else s

    def last_started(self, i: int) -> int:
        """Index of the last scheduled cycle of unit ``i`` (0 if none)."""
        last = 0
        for k, s in enumerate(self.starts[i], start=1):
            if s is None:
                break
            last = k
        return last

    def replace(self, i: int, k: int, week: int | None) -> OutageSchedule:
        rows = [list(r) for r in self.starts]
        rows[i][k - 1] = week
        return OutageSchedule(tuple(tuple(r) for r in rows))

    @classmethod
    def from_virtual(cls, rows: Sequence[Sequence[int]], weeks: int) -> OutageSchedule:
        return cls(tuple(tuple(None if s > weeks else int(s) for s in r) for r in rows))

    def distance(self, other: OutageSchedule, weeks: int) -> int:
        """Hamming distance between the step vectors of two schedules."""
        return sum(
            abs(min(self.virtual(i, k, weeks), weeks + 1) - min(other.virtual(i, k, weeks), weeks + 1))
            for i, row in enumerate(self.starts)
            for k in range(1, len(row) + 1)
        )


def baseline_schedule(instance: ProblemInstance) -> OutageSchedule:
    rows = []
    missing = []
    for i, u in enumerate(instance.t2_units):
        row = []
        for k, c in enumerate(u.cycles, start=1):
            if c.baseline_week is None:
                missing.append((u.id, k))
                row.append(None)
            else:
                row.append(None if c.baseline_week > instance.weeks else c.baseline_week)
        rows.append(tuple(row))
    if missing:
        raise BaselineError(f"baseline week missing for cycles {missing}")
    return OutageSchedule(tuple(rows))


@dataclass(frozen=True)
class DispatchPlan:
    refuel: np.ndarray  # (n_t2, K + 1)
    t2_production: np.ndarray  # (n_t2, K + 1, W)
    t1_production: np.ndarray  # (n_t1, W)
    fuel_start: np.ndarray  # (n_t2, K + 1)
    fuel_end: np.ndarray  # (n_t2, K + 1)
    horizon_fuel: np.ndarray  # (n_t2,)

    def __post_init__(self):
        for name in ("refuel", "t2_production", "t1_production", "fuel_start", "fuel_end", "horizon_fuel"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, instance: ProblemInstance) -> DispatchPlan:
        n2, K, W = instance.n_t2, instance.max_cycles, instance.weeks
        return cls(
            refuel=np.zeros((n2, K + 1)),
            t2_production=np.zeros((n2, K + 1, W)),
            t1_production=np.zeros((instance.n_t1, W)),
            fuel_start=np.zeros((n2, K + 1)),
            fuel_end=np.zeros((n2, K + 1)),
            horizon_fuel=np.zeros(n2),
        )


@dataclass(frozen=True)
class CostBreakdown:
    refuel_cost: float
    t1_cost: float
    final_fuel_credit: float
    stability: float = 0.0
    penalty_slack: float = 0.0

    @property
    def financial(self) -> float:
        return self.refuel_cost + self.t1_cost - self.final_fuel_credit


@dataclass(frozen=True)
class Violation:
    tag: str
    indices: tuple
    magnitude: float

    def __str__(self):
        return f"{self.tag}{self.indices}: {self.magnitude:.6g}"


@dataclass(frozen=True)
class Solution:
    schedule: OutageSchedule
    dispatch: DispatchPlan
    cost: CostBreakdown
    violations: tuple[Violation, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def objective(self) -> float:
        return self.cost.financial


# ---------------------------------------------------------------------------
# evaluation


def _check_dims(dispatch: DispatchPlan, instance: ProblemInstance) -> None:
    n2, K, W = instance.n_t2, instance.max_cycles, instance.weeks
    expected = {
        "refuel": (n2, K + 1),
        "t2_production": (n2, K + 1, W),
        "t1_production": (instance.n_t1, W),
        "fuel_start": (n2, K + 1),
        "fuel_end": (n2, K + 1),
        "horizon_fuel": (n2,),
    }
    for name, shape in expected.items():
        got = getattr(dispatch, name).shape
        if got != shape:
            raise DimensionError(f"{name}: shape {got}, expected {shape}")


def financial_cost(dispatch: DispatchPlan, instance: ProblemInstance) -> float:
    """Refuel cost plus T1 production cost minus the end-of-horizon fuel credit."""
    _check_dims(dispatch, instance)
    refuel = 0.0
    for i, u in enumerate(instance.t2_units):
        for k, c in enumerate(u.cycles, start=1):
            refuel += c.refuel_cost * dispatch.refuel[i, k]
    t1 = 0.0
    for j, u in enumerate(instance.t1_units):
        t1 += float(np.dot(np.asarray(u.cost) * instance.F, dispatch.t1_production[j]))
    credit = sum(u.final_fuel_credit * dispatch.horizon_fuel[i] for i, u in enumerate(instance.t2_units))
    return refuel + t1 - credit


def cost_breakdown(dispatch: DispatchPlan, instance: ProblemInstance, stability: float = 0.0,
                   penalty_slack: float = 0.0) -> CostBreakdown:
    _check_dims(dispatch, instance)
    refuel = sum(
        c.refuel_cost * dispatch.refuel[i, k]
        for i, u in enumerate(instance.t2_units)
        for k, c in enumerate(u.cycles, start=1)
    )
    t1 = sum(
        float(np.dot(np.asarray(u.cost) * instance.F, dispatch.t1_production[j]))
        for j, u in enumerate(instance.t1_units)
    )
    credit = sum(u.final_fuel_credit * dispatch.horizon_fuel[i] for i, u in enumerate(instance.t2_units))
    return CostBreakdown(float(refuel), float(t1), float(credit), float(stability), float(penalty_slack))


SHAPES = ("count", "linear", "quadratic", "custom")


def penalty(shape: str, week: int, base: int, weights: Sequence[float] | None = None) -> float:
    """Rescheduling cost of starting at ``week`` for an outage planned at ``base``.

    Both weeks use ``W + 1`` for "not scheduled".
    """
    if week == base:
        return 0.0
    if shape == "count":
        return 1.0
    if shape == "linear":
        return float(abs(week - base))
    if shape == "quadratic":
        return float((week - base) ** 2)
    if shape == "custom":
        if weights is None:
            raise BaselineError("custom shape needs stability_weights")
        if week - 1 < len(weights):
            return float(weights[week - 1])
        return float(max(weights))
    raise ValueError(f"unknown penalty shape {shape!r}")


def stability_cost(schedule: OutageSchedule, instance: ProblemInstance, shape: str = "count",
                   baseline: OutageSchedule | None = None) -> float:
    """Sum of rescheduling penalties against the baseline weeks."""
    W = instance.weeks
    if baseline is None:
        baseline = baseline_schedule(instance)
    total = 0.0
    for i, u in enumerate(instance.t2_units):
        for k, c in enumerate(u.cycles, start=1):
            total += penalty(shape, schedule.virtual(i, k, W), baseline.virtual(i, k, W), c.stability_weights)
    return total


@dataclass(frozen=True)
class FuelTrajectory:
    fuel_start: np.ndarray  # (n_t2, K + 1); zero for cycles never started
    fuel_end: np.ndarray
    horizon_fuel: np.ndarray
    residual: np.ndarray  # (n_t2, W), fuel left after the week's production


def cycle_of_week(schedule: OutageSchedule, i: int, weeks: int) -> np.ndarray:
    """Active cycle index (0..K) for each week of unit ``i``."""
    out = np.zeros(weeks, dtype=int)
    for k, s in enumerate(schedule.starts[i], start=1):
        if s is None:
            break
        out[s - 1:] = k
    return out


def campaign_mask(schedule: OutageSchedule, instance: ProblemInstance, i: int, k: int) -> np.ndarray:
    """Boolean mask over weeks of production campaign ``k`` (outage weeks excluded)."""
    W = instance.weeks
    mask = np.zeros(W, dtype=bool)
    u = instance.t2_units[i]
    if k == 0:
        begin = 1
    else:
        s = schedule.week_of(i, k)
        if s is None:
            return mask
        begin = s + u.cycle(k).duration
    end = W + 1 if k >= u.n_cycles else schedule.virtual(i, k + 1, W)
    if begin <= W:
        mask[begin - 1:min(end, W + 1) - 1] = True
    return mask


def simulate_fuel(schedule: OutageSchedule, refuels: np.ndarray, t2_productions: np.ndarray,
                  instance: ProblemInstance) -> FuelTrajectory:
    """Fuel levels implied by refuels and productions for the started cycles."""
    n2, K, W = instance.n_t2, instance.max_cycles, instance.weeks
    F = instance.F
    xs = np.zeros((n2, K + 1))
    xe = np.zeros((n2, K + 1))
    xh = np.zeros(n2)
    residual = np.zeros((n2, W))
    for i, u in enumerate(instance.t2_units):
        last = schedule.last_started(i)
        for k in range(last + 1):
            if k == 0:
                xs[i, 0] = u.initial_fuel
            else:
                c, prev_bo = u.cycle(k), (u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null)
                q = c.loss_factor
                xs[i, k] = c.bore_null + refuels[i, k] + (q - 1.0) / q * (xe[i, k - 1] - prev_bo)
            used = F * t2_productions[i, k]
            xe[i, k] = xs[i, k] - used.sum()
        xh[i] = xe[i, last]
        active = cycle_of_week(schedule, i, W)
        for w in range(W):
            k = active[w]
            residual[i, w] = xs[i, k] - float(np.dot(F[: w + 1], t2_productions[i, k, : w + 1]))
    return FuelTrajectory(xs, xe, xh, residual)


def resource_usage(rc: ResourceConstraint, schedule: OutageSchedule, instance: ProblemInstance,
                   week: int) -> float:
    total = 0.0
    for unit, k in rc.members:
        s = schedule.week_of(instance.unit_index[unit], k)
        if s is not None and s <= week:
            total += rc.increment((unit, k), week)
    return total


def schedule_violations(schedule: OutageSchedule, instance: ProblemInstance, tol: float = TOL) -> list[Violation]:
    """Combinatorial checks: CT13 windows and sequencing, CT14-21 resources."""
    W = instance.weeks
    out: list[Violation] = []
    for i, u in enumerate(instance.t2_units):
        if len(schedule.starts[i]) != u.n_cycles:
            raise DimensionError(f"schedule row {i}: {len(schedule.starts[i])} cycles, expected {u.n_cycles}")
        prev_end = None
        skipped = False
        for k, c in enumerate(u.cycles, start=1):
            s = schedule.week_of(i, k)
            if s is None:
                if c.latest <= W:
                    out.append(Violation("CT13", (i, k, "mandatory"), 1.0))
                skipped = True
                continue
            if skipped:
                out.append(Violation("CT13", (i, k, "skipped-cycle"), 1.0))
            if not 1 <= s <= W:
                out.append(Violation("CT13", (i, k, "horizon"), float(abs(s - W))))
            if s < c.earliest:
                out.append(Violation("CT13", (i, k, "earliest"), float(c.earliest - s)))
            if s > c.latest:
                out.append(Violation("CT13", (i, k, "latest"), float(s - c.latest)))
            if prev_end is not None and s < prev_end:
                out.append(Violation("CT13", (i, k, "overlap"), float(prev_end - s)))
            prev_end = s + c.duration
    for rc in instance.scheduling_constraints:
        for w in rc.weeks:
            used = resource_usage(rc, schedule, instance, w)
            if used > rc.capacity[w] + tol:
                out.append(Violation("CT14-21", (rc.id, w), used - rc.capacity[w]))
    return out


def validate(solution: Solution, instance: ProblemInstance, tol: float = TOL,
             check_ct6: bool = False) -> list[Violation]:
    """Every violated in-scope constraint of ``solution``; never raises on bad values."""
    sched, disp = solution.schedule, solution.dispatch
    _check_dims(disp, instance)
    W, F = instance.weeks, instance.F
    out = schedule_violations(sched, instance, tol)

    # CT1
    supply = disp.t1_production.sum(axis=0) + disp.t2_production.sum(axis=(0, 1))
    for w in range(W):
        gap = abs(supply[w] - instance.D[w])
        if gap > tol:
            out.append(Violation("CT1", (w + 1,), float(gap)))
    # CT2
    for j, u in enumerate(instance.t1_units):
        for w in range(W):
            p = disp.t1_production[j, w]
            if p < u.p_min[w] - tol:
                out.append(Violation("CT2", (j, w + 1, "min"), float(u.p_min[w] - p)))
            elif p > u.p_max[w] + tol:
                out.append(Violation("CT2", (j, w + 1, "max"), float(p - u.p_max[w])))

    traj = simulate_fuel(sched, disp.refuel, disp.t2_production, instance)
    for i, u in enumerate(instance.t2_units):
        pmax = instance.t2_pmax[i]
        active = cycle_of_week(sched, i, W)
        last = sched.last_started(i)
        # CT3-5
        for k in range(disp.t2_production.shape[1]):
            prod = disp.t2_production[i, k]
            mask = campaign_mask(sched, instance, i, k) if k <= u.n_cycles else np.zeros(W, dtype=bool)
            for w in np.flatnonzero(~mask & (np.abs(prod) > tol)):
                tag = "CT3" if k == active[w] else "CT4"
                out.append(Violation(tag, (i, k, int(w) + 1), float(abs(prod[w]))))
            for w in np.flatnonzero(prod < -tol):
                out.append(Violation("CT5", (i, k, int(w) + 1, "negative"), float(-prod[w])))
        total = disp.t2_production[i].sum(axis=0)
        for w in np.flatnonzero(total > pmax + tol):
            out.append(Violation("CT5", (i, int(w) + 1), float(total[w] - pmax[w])))
        # CT7
        for k, c in enumerate(u.cycles, start=1):
            r = disp.refuel[i, k]
            if sched.week_of(i, k) is None:
                if abs(r) > tol:
                    out.append(Violation("CT7", (i, k, "unscheduled"), float(abs(r))))
            elif r < c.refuel_min - tol:
                out.append(Violation("CT7", (i, k, "min"), float(c.refuel_min - r)))
            elif r > c.refuel_max + tol:
                out.append(Violation("CT7", (i, k, "max"), float(r - c.refuel_max)))
        # CT8
        if abs(disp.fuel_start[i, 0] - u.initial_fuel) > tol:
            out.append(Violation("CT8", (i,), float(abs(disp.fuel_start[i, 0] - u.initial_fuel))))
        # CT9-10
        for k in range(last + 1):
            for name, sim, got in (("start", traj.fuel_start, disp.fuel_start), ("end", traj.fuel_end, disp.fuel_end)):
                if k == 0 and name == "start":
                    continue
                if abs(sim[i, k] - got[i, k]) > tol:
                    out.append(Violation("CT9-10", (i, k, name), float(abs(sim[i, k] - got[i, k]))))
        if abs(traj.horizon_fuel[i] - disp.horizon_fuel[i]) > tol:
            out.append(Violation("CT9-10", (i, "horizon"), float(abs(traj.horizon_fuel[i] - disp.horizon_fuel[i]))))
        # CT11
        for k in range(last + 1):
            if k >= 1:
                c = u.cycle(k)
                if traj.fuel_start[i, k] > c.stock_max + tol:
                    out.append(Violation("CT11", (i, k, "stock_max"), float(traj.fuel_start[i, k] - c.stock_max)))
                if traj.fuel_end[i, k - 1] > c.stock_max_before_outage + tol:
                    out.append(Violation("CT11", (i, k, "before_outage"),
                                         float(traj.fuel_end[i, k - 1] - c.stock_max_before_outage)))
            if traj.fuel_start[i, k] < -tol:
                out.append(Violation("CT11", (i, k, "negative_start"), float(-traj.fuel_start[i, k])))
            if traj.fuel_end[i, k] < -tol:
                out.append(Violation("CT11", (i, k, "negative_end"), float(-traj.fuel_end[i, k])))
        neg = traj.residual[i] < -tol
        for w in np.flatnonzero(neg):
            out.append(Violation("CT11", (i, int(w) + 1, "negative_residual"), float(-traj.residual[i, w])))
        # CT6, upper envelope only
        if check_ct6:
            for w in range(W):
                k = active[w]
                if k == 0:
                    continue
                prof = u.cycle(k).stretch_profile
                if prof is None:
                    continue
                cap = pmax[w] * prof.envelope(traj.residual[i, w])
                p = disp.t2_production[i, k, w]
                if p > cap + tol:
                    out.append(Violation("CT6", (i, k, w + 1), float(p - cap)))
    return out


# ---------------------------------------------------------------------------
# indicators


class GapError(ValueError):
    pass


def gap(value: float, bks: float) -> float:
    """Relative distance to the best known solution."""
    if bks <= 0:
        raise GapError(f"best known value must be > 0, got {bks}")
    return abs(value - bks) / bks


@dataclass(frozen=True)
class GapStats:
    n: int
    mean_gap: float
    std_gap: float
    q1: float
    q2: float
    q3: float
    n_below: dict[float, int]
    n_failures: int


def aggregate_stats(gaps: Sequence[float], thresholds: Sequence[float] = (0.0001, 0.0005, 0.01)) -> GapStats:
    """Mean, population deviation and quartiles of the non-failed gaps.

    A gap above 1.0 counts as a failure and is excluded from the moments and
    quartiles. ``n_below[x]`` counts gaps strictly below ``x``.
    """
    arr = np.asarray(list(gaps), dtype=float)
    failed = arr > 1.0
    ok = arr[~failed]
    if ok.size:
        mean = float(ok.mean())
        std = float(math.sqrt(((ok - mean) ** 2).sum() / ok.size))
        q1, q2, q3 = (float(v) for v in np.percentile(ok, [25, 50, 75]))
    else:
        mean = std = q1 = q2 = q3 = math.nan
    n_below = {float(x): int((arr < x).sum()) for x in thresholds}
    return GapStats(int(arr.size), mean, std, q1, q2, q3, n_below, int(failed.sum()))
