"""Window reductions applied before model building.

:func:`tighten_exact` never removes a feasible schedule.  The two other
reductions are heuristic and mark the returned instance as restricted.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import ProblemInstance


class InfeasibleInstance(ValueError):
    pass


@dataclass(frozen=True)
class WindowChange:
    unit: str
    cycle: int
    old: tuple[int, int]
    new: tuple[int, int] | None  # None: outage removed
    heuristic: bool


@dataclass
class ReductionReport:
    changes: list[WindowChange] = field(default_factory=list)
    binaries_before: int = 0
    binaries_after: int = 0
    heuristic: bool = False

    @property
    def removed(self) -> list[tuple[str, int]]:
        return [(c.unit, c.cycle) for c in self.changes if c.new is None]

    def merge(self, other: ReductionReport) -> ReductionReport:
        return ReductionReport(self.changes + other.changes, self.binaries_before, other.binaries_after,
                               self.heuristic or other.heuristic)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["unit", "cycle", "old_earliest", "old_latest", "new_earliest", "new_latest", "action", "heuristic"])
        for c in self.changes:
            new = c.new or ("", "")
            w.writerow([c.unit, c.cycle, c.old[0], c.old[1], new[0], new[1],
                        "removed" if c.new is None else "tightened", int(c.heuristic)])
        w.writerow(["#binaries", "", self.binaries_before, "", self.binaries_after, "", "", int(self.heuristic)])
        return buf.getvalue()


def _min_start_fuel(instance: ProblemInstance, i: int, k: int) -> float:
    """Smallest fuel level cycle ``k`` can start with."""
    u = instance.t2_units[i]
    if k == 0:
        return u.initial_fuel
    c = u.cycle(k)
    prev_bo = u.initial_bore_null if k == 1 else u.cycle(k - 1).bore_null
    prev_cap = u.initial_fuel if k == 1 else u.cycle(k - 1).stock_max
    highest_end = min(c.stock_max_before_outage, prev_cap)
    q = c.loss_factor
    return max(0.0, c.bore_null + c.refuel_min + (q - 1.0) / q * (highest_end - prev_bo))


def earliest_starts(instance: ProblemInstance, open_from: int | None = None) -> dict[tuple[int, int], int]:
    """Forward pass: earliest start of each outage implied by fuel depletion at maximal power.

    Windows of cycles ``>= open_from`` are ignored (only their physics count).
    Values may exceed ``W`` when an outage cannot start inside the horizon.
    """
    W, F = instance.weeks, instance.F
    out = {}
    for i, u in enumerate(instance.t2_units):
        burn = np.concatenate([[0.0], np.cumsum(F * instance.t2_pmax[i])])  # burn[w] = weeks 1..w
        prev_end = 1  # first week of the current campaign
        for k in range(1, u.n_cycles + 1):
            c = u.cycle(k)
            need = _min_start_fuel(instance, i, k - 1) - c.stock_max_before_outage
            s = prev_end
            if need > 0:
                # first s with burn over weeks prev_end..s-1 >= need
                target = burn[prev_end - 1] + need * (1.0 - 1e-9) - 1e-9
                idx = int(np.searchsorted(burn, target, side="left"))
                s = max(prev_end, idx + 1) if idx <= W else W + 1
            if open_from is None or k < open_from:
                s = max(s, c.earliest)
            s = min(s, W + 1) if s > W else s
            out[i, k] = s
            prev_end = s + c.duration
            if prev_end > W + 1:
                prev_end = W + 1
    return out


def _with_windows(instance: ProblemInstance, windows: dict[tuple[int, int], tuple[int, int] | None],
                  restricted: bool) -> ProblemInstance:
    units = []
    for i, u in enumerate(instance.t2_units):
        cycles = []
        for k, c in enumerate(u.cycles, start=1):
            win = windows.get((i, k), (c.earliest, c.latest))
            if win is None:
                break
            cycles.append(replace(c, earliest=win[0], latest=win[1]))
        units.append(replace(u, cycles=tuple(cycles)))
    kept = {u.id: u.n_cycles for u in units}
    rcs = []
    for rc in instance.scheduling_constraints:
        members = tuple(m for m in rc.members if m[1] <= kept[m[0]])
        if not members:
            continue
        if len(members) != len(rc.members):
            cons = {key: v for key, v in rc.consumption.items() if (key[0], key[1]) in members}
            rc = replace(rc, members=members, consumption=cons)
        rcs.append(rc)
    return replace(instance, t2_units=tuple(units), scheduling_constraints=tuple(rcs),
                   restricted=instance.restricted or restricted)


def _report(instance: ProblemInstance, windows, heuristic: bool) -> tuple[ProblemInstance, ReductionReport]:
    changes = []
    for (i, k), new in sorted(windows.items()):
        c = instance.t2_units[i].cycle(k)
        old = (c.earliest, c.latest)
        if new != old:
            changes.append(WindowChange(instance.t2_units[i].id, k, old, new, heuristic))
    reduced = _with_windows(instance, windows, heuristic) if changes else instance
    rep = ReductionReport(changes, instance.binary_count(), reduced.binary_count(), heuristic and bool(changes))
    return reduced, rep


def tighten_exact(instance: ProblemInstance, max_rounds: int | None = None) -> tuple[ProblemInstance, ReductionReport]:
    """Raise earliest starts to what fuel depletion allows; drop optional outages that cannot fit."""
    W = instance.weeks
    current = instance
    total = ReductionReport(binaries_before=instance.binary_count(), binaries_after=instance.binary_count())
    rounds = max_rounds or max(1, instance.max_cycles)
    for _ in range(rounds):
        early = earliest_starts(current)
        windows: dict[tuple[int, int], tuple[int, int] | None] = {}
        gone: set[int] = set()
        for (i, k), s in early.items():
            if i in gone:
                windows[i, k] = None
                continue
            c = current.t2_units[i].cycle(k)
            optional = c.latest > W
            if s > c.latest or (s > W and not optional):
                raise InfeasibleInstance(
                    f"outage ({current.t2_units[i].id}, {k}) cannot start before week {s} "
                    f"but must start by week {c.latest}")
            if s > W:
                windows[i, k] = None
                gone.add(i)
            else:
                windows[i, k] = (max(s, c.earliest), c.latest)
        reduced, rep = _report(current, windows, heuristic=False)
        if not rep.changes:
            break
        total = ReductionReport(total.changes + rep.changes, total.binaries_before, rep.binaries_after)
        current = reduced
    total.binaries_after = current.binary_count()
    return current, total


def tighten_max_cycle_length(instance: ProblemInstance, max_len: int) -> tuple[ProblemInstance, ReductionReport]:
    """Heuristic: campaigns last at most ``max_len`` weeks, capping later latest starts."""
    if max_len < 1:
        raise ValueError("maximal cycle length must be >= 1")
    W = instance.weeks
    windows = {}
    for i, u in enumerate(instance.t2_units):
        prev_latest = None
        for k, c in enumerate(u.cycles, start=1):
            lo, hi = c.earliest, c.latest
            if prev_latest is not None and prev_latest <= W:
                cap = prev_latest + u.cycle(k - 1).duration + max_len
                if cap < hi:
                    hi = max(lo, cap)
            windows[i, k] = (lo, hi)
            prev_latest = hi
    return _report(instance, windows, heuristic=True)


def fix_from_lp(instance: ProblemInstance, lp_values: np.ndarray, varmap, eps: float = 1e-6
                ) -> tuple[ProblemInstance, ReductionReport]:
    """Heuristic: shrink each window to where the relaxation's step values are fractional."""
    W = instance.weeks
    windows = {}
    for i, u in enumerate(instance.t2_units):
        for k, c in enumerate(u.cycles, start=1):
            if k > varmap.n_cycles[i]:
                windows[i, k] = (c.earliest, c.latest)
                continue
            vals = [varmap.d_expr(i, k, w).value(lp_values) for w in range(1, W + 1)]
            zeros = [w for w, v in enumerate(vals, start=1) if v <= eps]
            ones = [w for w, v in enumerate(vals, start=1) if v >= 1.0 - eps]
            lo = max(c.earliest, zeros[-1] + 1 if zeros else 1)
            hi = min(c.latest, ones[0]) if ones else c.latest
            windows[i, k] = (min(lo, hi), hi)
    return _report(instance, windows, heuristic=True)
