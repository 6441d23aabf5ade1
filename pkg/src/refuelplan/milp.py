"""Solver-agnostic linear model plus branch-and-bound backends.

Formulation code only talks to :class:`Model`, :func:`solve` and
:func:`solve_lp_relaxation`.  The backend is picked by name, by the
``REFUELPLAN_BACKEND`` environment variable, or defaults to HiGHS.
"""
from __future__ import annotations

import logging
import math
import os
import re
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

INF = math.inf


class ModelError(ValueError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class Var:
    index: int
    name: str

    def _expr(self) -> LinExpr:
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-1.0) * self._expr() + other

    def __mul__(self, k):
        return self._expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0


class LinExpr:
    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(x) -> LinExpr:
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return x._expr()
        return LinExpr(const=float(x))

    def copy(self) -> LinExpr:
        return LinExpr(self.terms, self.const)

    def add(self, x, k: float = 1.0) -> LinExpr:
        """In-place ``self += k * x``."""
        if isinstance(x, Var):
            self.terms[x.index] = self.terms.get(x.index, 0.0) + k
        elif isinstance(x, LinExpr):
            for i, v in x.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + k * v
            self.const += k * x.const
        else:
            self.const += k * float(x)
        return self

    def __add__(self, other):
        return self.copy().add(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def __rsub__(self, other):
        return (self * -1.0).add(other)

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: v * k for i, v in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def is_constant(self) -> bool:
        return all(v == 0.0 for v in self.terms.values())

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[i] for i, v in self.terms.items())

    def __repr__(self):
        return f"LinExpr({self.terms}, {self.const})"


def quicksum(items: Iterable) -> LinExpr:
    out = LinExpr()
    for x in items:
        out.add(x)
    return out


@dataclass(frozen=True)
class Row:
    name: str
    coefs: tuple[tuple[int, float], ...]
    sense: str  # "<=", ">=", "=="
    rhs: float


class Model:
    """Variables, linear rows and a linear objective.

    Treat a built model as immutable: transformations go through
    :meth:`copy` first.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.is_int: list[bool] = []
        self.rows: list[Row] = []
        self.objective = LinExpr()
        self.sense = "min"
        self._names: set[str] = set()
        self.infeasible_rows: list[str] = []

    # -- construction --------------------------------------------------------

    def _claim(self, name: str) -> None:
        if name in self._names:
            raise ModelError(f"duplicate name {name!r}")
        self._names.add(name)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> Var:
        self._claim(name)
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.is_int.append(binary)
        return Var(len(self.var_names) - 1, name)

    def add_constr(self, lhs, sense: str, rhs=0.0, name: str | None = None) -> None:
        if sense not in ("<=", ">=", "=="):
            raise ModelError(f"bad sense {sense!r}")
        expr = LinExpr.of(lhs) - LinExpr.of(rhs)
        name = name or f"c{len(self.rows)}"
        coefs = tuple((i, v) for i, v in sorted(expr.terms.items()) if v != 0.0)
        for i, _ in coefs:
            if not 0 <= i < len(self.var_names):
                raise ModelError(f"row {name!r} references undeclared variable {i}")
        bound = -expr.const
        if not coefs:
            ok = {"<=": 0.0 <= bound + 1e-9, ">=": 0.0 >= bound - 1e-9, "==": abs(bound) <= 1e-9}[sense]
            if not ok:
                self._claim(name)
                self.infeasible_rows.append(name)
            return
        self._claim(name)
        self.rows.append(Row(name, coefs, sense, bound))

    def set_objective(self, expr, sense: str = "min") -> None:
        self.objective = LinExpr.of(expr).copy()
        self.sense = sense

    def set_bounds(self, var: Var | int, lb: float | None = None, ub: float | None = None) -> None:
        i = var.index if isinstance(var, Var) else var
        if lb is not None:
            self.lb[i] = float(lb)
        if ub is not None:
            self.ub[i] = float(ub)

    def fix(self, var: Var | int, value: float) -> None:
        self.set_bounds(var, value, value)

    def copy(self, name: str | None = None) -> Model:
        m = Model(name or self.name)
        m.var_names = list(self.var_names)
        m.lb, m.ub, m.is_int = list(self.lb), list(self.ub), list(self.is_int)
        m.rows = list(self.rows)
        m.objective = self.objective.copy()
        m.sense = self.sense
        m._names = set(self._names)
        m.infeasible_rows = list(self.infeasible_rows)
        return m

    # -- queries ------------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def num_binaries(self, free_only: bool = True) -> int:
        return sum(
            1 for b, lo, hi in zip(self.is_int, self.lb, self.ub)
            if b and (not free_only or lo < hi)
        )

    def matrix(self) -> sparse.csr_matrix:
        indptr, idx, val = [0], [], []
        for r in self.rows:
            for i, v in r.coefs:
                idx.append(i)
                val.append(v)
            indptr.append(len(idx))
        return sparse.csr_matrix((val, idx, indptr), shape=(len(self.rows), self.num_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([r.rhs if r.sense in (">=", "==") else -INF for r in self.rows])
        hi = np.array([r.rhs if r.sense in ("<=", "==") else INF for r in self.rows])
        return lo, hi

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for i, v in self.objective.terms.items():
            c[i] += v
        return c

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective.value(np.asarray(x, dtype=float)))

    def max_violation(self, x: np.ndarray, integrality: bool = True) -> float:
        """Largest absolute bound, row or integrality violation of ``x``."""
        x = np.asarray(x, dtype=float)
        if self.infeasible_rows:
            return INF
        worst = 0.0
        lb, ub = np.array(self.lb), np.array(self.ub)
        worst = max(worst, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        if self.rows:
            ax = self.matrix() @ x
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(lo - ax, initial=0.0)), float(np.max(ax - hi, initial=0.0)))
        if integrality:
            ints = np.array(self.is_int)
            if ints.any():
                worst = max(worst, float(np.max(np.abs(x[ints] - np.round(x[ints])))))
        return worst


# ---------------------------------------------------------------------------
# solving


STATUSES = ("optimal", "feasible_limit", "infeasible", "unbounded", "no_solution_limit")


@dataclass(frozen=True)
class SolveConfig:
    time_limit: float = 300.0
    rel_gap_tol: float = 1e-4
    abs_gap_tol: float = 1e-6
    warmstart: np.ndarray | None = None
    heuristic_emphasis: str = "default"
    cut_passes: int | None = None
    presolve: bool = True
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be > 0")
        if self.heuristic_emphasis not in ("default", "aggressive"):
            raise ValueError("heuristic_emphasis must be 'default' or 'aggressive'")

    def with_(self, **kw) -> SolveConfig:
        return replace(self, **kw)


@dataclass
class SolveOutcome:
    status: str
    values: np.ndarray | None
    objective: float
    dual_bound: float
    runtime: float
    nodes: int = 0
    iterations: int = 0
    used_warmstart: bool = False
    backend: str = ""

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    def __getitem__(self, var: Var | int) -> float:
        if self.values is None:
            raise KeyError("no primal solution")
        return float(self.values[var.index if isinstance(var, Var) else var])


class _HighsBackend:
    name = "highs"

    def __init__(self):
        try:
            import highspy
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise BackendUnavailable("highspy is not installed") from exc
        self.hp = highspy

    def run(self, model: Model, cfg: SolveConfig, relax: bool) -> SolveOutcome:
        hp = self.hp
        h = hp.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("time_limit", float(cfg.time_limit))
        h.setOptionValue("mip_rel_gap", float(cfg.rel_gap_tol))
        h.setOptionValue("mip_abs_gap", float(cfg.abs_gap_tol))
        h.setOptionValue("presolve", "on" if cfg.presolve else "off")
        h.setOptionValue("random_seed", int(cfg.seed))
        h.setOptionValue("mip_heuristic_effort", 0.3 if cfg.heuristic_emphasis == "aggressive" else 0.05)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("mip_feasibility_tolerance", 1e-9)
        if cfg.threads and cfg.threads > 0:
            h.setOptionValue("threads", int(cfg.threads))
        if cfg.cut_passes is not None:
            log.debug("HiGHS exposes no cut-pass cap; cut_passes=%s ignored", cfg.cut_passes)

        n = model.num_vars
        lp = hp.HighsLp()
        lp.num_col_ = n
        lp.num_row_ = model.num_rows
        lp.col_cost_ = model.cost_vector() * (1.0 if model.sense == "min" else -1.0)
        lp.offset_ = model.objective.const * (1.0 if model.sense == "min" else -1.0)
        lp.col_lower_ = np.array(model.lb, dtype=float)
        lp.col_upper_ = np.array(model.ub, dtype=float)
        lo, hi = model.row_bounds()
        lp.row_lower_ = lo
        lp.row_upper_ = hi
        a = model.matrix()
        lp.a_matrix_.format_ = hp.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = a.indptr.astype(np.int32)
        lp.a_matrix_.index_ = a.indices.astype(np.int32)
        lp.a_matrix_.value_ = a.data.astype(float)
        integer = (not relax) and any(model.is_int)
        if integer:
            lp.integrality_ = [hp.HighsVarType.kInteger if b else hp.HighsVarType.kContinuous for b in model.is_int]
        h.passModel(lp)
        if integer and cfg.warmstart is not None:
            sol = hp.HighsSolution()
            sol.col_value = list(np.asarray(cfg.warmstart, dtype=float))
            sol.value_valid = True
            h.setSolution(sol)

        t0 = time.perf_counter()
        h.run()
        runtime = time.perf_counter() - t0
        ms = h.getModelStatus()
        info = h.getInfo()
        has_primal = info.primal_solution_status == 2
        values = np.array(h.getSolution().col_value) if has_primal and n else (np.zeros(0) if has_primal else None)
        sign = 1.0 if model.sense == "min" else -1.0
        obj = sign * info.objective_function_value if has_primal else INF
        if integer:
            bound = sign * info.mip_dual_bound
        else:
            bound = obj
        M = hp.HighsModelStatus
        if ms == M.kOptimal:
            status = "optimal"
        elif ms == M.kInfeasible:
            status = "infeasible"
        elif ms in (M.kUnbounded, M.kUnboundedOrInfeasible):
            status = "unbounded" if ms == M.kUnbounded else "infeasible"
        elif ms == M.kModelEmpty:
            status, values, obj, bound = "optimal", np.zeros(0), model.objective.const, model.objective.const
        else:
            status = "feasible_limit" if has_primal else "no_solution_limit"
        return SolveOutcome(
            status, values, obj, bound, runtime,
            nodes=int(info.mip_node_count) if integer else 0,
            iterations=int(info.simplex_iteration_count),
            backend=self.name,
        )


class _ScipyBackend:
    name = "scipy"

    def run(self, model: Model, cfg: SolveConfig, relax: bool) -> SolveOutcome:
        from scipy.optimize import Bounds, LinearConstraint, milp

        sign = 1.0 if model.sense == "min" else -1.0
        c = model.cost_vector() * sign
        cons = []
        if model.num_rows:
            lo, hi = model.row_bounds()
            cons.append(LinearConstraint(model.matrix(), lo, hi))
        integrality = np.zeros(model.num_vars) if relax else np.array(model.is_int, dtype=float)
        t0 = time.perf_counter()
        res = milp(
            c, constraints=cons, integrality=integrality,
            bounds=Bounds(np.array(model.lb), np.array(model.ub)),
            options={"time_limit": cfg.time_limit, "mip_rel_gap": cfg.rel_gap_tol, "presolve": cfg.presolve},
        )
        runtime = time.perf_counter() - t0
        values = None if res.x is None else np.asarray(res.x)
        obj = INF if values is None else sign * float(res.fun) + model.objective.const
        bound = obj
        if getattr(res, "mip_dual_bound", None) is not None and values is not None:
            bound = sign * float(res.mip_dual_bound) + model.objective.const
        status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status)
        if status is None:
            status = "feasible_limit" if values is not None else "no_solution_limit"
        return SolveOutcome(status, values, obj, bound, runtime,
                            nodes=int(getattr(res, "mip_node_count", 0) or 0), backend=self.name)


_BACKENDS = {"highs": _HighsBackend, "scipy": _ScipyBackend}


def get_backend(name: str | None = None):
    name = (name or os.environ.get("REFUELPLAN_BACKEND") or "highs").lower()
    try:
        cls = _BACKENDS[name]
    except KeyError:
        raise BackendUnavailable(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}") from None
    return cls()


def _check(model: Model) -> None:
    for r in model.rows:
        for i, _ in r.coefs:
            if not 0 <= i < model.num_vars:
                raise ModelError(f"row {r.name!r} references undeclared variable {i}")
    for name, lo, hi in zip(model.var_names, model.lb, model.ub):
        if lo > hi + 1e-12:
            raise ModelError(f"variable {name!r} has empty domain [{lo}, {hi}]")


def _infeasible(model: Model) -> SolveOutcome:
    return SolveOutcome("infeasible", None, INF, INF, 0.0)


def solve(model: Model, config: SolveConfig | None = None, backend: str | None = None) -> SolveOutcome:
    """Solve ``model``; a feasible warm start is never returned worse."""
    cfg = config or SolveConfig()
    _check(model)
    if model.infeasible_rows:
        return _infeasible(model)
    out = get_backend(backend).run(model, cfg, relax=False)
    if cfg.warmstart is not None and out.status not in ("infeasible", "unbounded"):
        ws = np.asarray(cfg.warmstart, dtype=float)
        if ws.shape == (model.num_vars,) and model.max_violation(ws) <= 1e-6:
            ws_obj = model.objective_value(ws)
            better = out.has_solution and out.objective <= ws_obj + 1e-9 * max(1.0, abs(ws_obj))
            if not better:
                out = replace(out, values=ws.copy(), objective=ws_obj,
                              status="feasible_limit" if out.status != "optimal" else "optimal",
                              used_warmstart=True)
                if out.status == "optimal" and abs(ws_obj - out.dual_bound) > max(
                        cfg.abs_gap_tol, cfg.rel_gap_tol * abs(ws_obj)) + 1e-9:
                    out.status = "feasible_limit"
    return out


def solve_lp_relaxation(model: Model, config: SolveConfig | None = None, backend: str | None = None) -> SolveOutcome:
    cfg = config or SolveConfig()
    _check(model)
    if model.infeasible_rows:
        return _infeasible(model)
    return get_backend(backend).run(model, cfg, relax=True)


# ---------------------------------------------------------------------------
# export


_SAFE = re.compile(r"[^A-Za-z0-9_]")


def sanitize_names(names: Iterable[str]) -> dict[str, str]:
    """Map each name to an LP/MPS-safe, unique token (only changed names listed)."""
    used: set[str] = set()
    renamed: dict[str, str] = {}
    for name in names:
        safe = _SAFE.sub("_", name) or "_"
        if safe[0].isdigit() or safe[0] in "eE" and safe[1:].isdigit():
            safe = "n" + safe
        base, n = safe, 1
        while safe in used:
            safe = f"{base}_{n}"
            n += 1
        used.add(safe)
        if safe != name:
            renamed[name] = safe
    return renamed


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) or abs(v) >= 1e15 else str(int(v))


def export_model(model: Model, fmt: str = "LP") -> str:
    """Render ``model`` as CPLEX-LP or free-MPS text."""
    fmt = fmt.upper()
    renamed = sanitize_names(model.var_names)
    row_renamed = sanitize_names([r.name for r in model.rows] + ["obj"])
    if renamed or row_renamed:
        log.info("export renamed %d names: %s", len(renamed) + len(row_renamed),
                 {**renamed, **row_renamed})
    vn = [renamed.get(n, n) for n in model.var_names]
    rn = [row_renamed.get(r.name, r.name) for r in model.rows]
    obj_name = row_renamed.get("obj", "obj")
    const = model.objective.const
    offset_var = None
    if const != 0.0:
        offset_var = "obj_offset_fixed"
        while offset_var in vn:
            offset_var += "_"
    if fmt == "LP":
        return _export_lp(model, vn, rn, obj_name, offset_var)
    if fmt == "MPS":
        return _export_mps(model, vn, rn, obj_name, offset_var)
    raise ValueError(f"unknown format {fmt!r}")


def _lp_terms(coefs, vn) -> list[str]:
    out = []
    for i, v in coefs:
        sign = "-" if v < 0 else "+"
        out.append(f"{sign} {_fmt(abs(v))} {vn[i]}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(prefix: str, terms: list[str], per_line: int = 6) -> list[str]:
    if not terms:
        return [prefix]
    lines = []
    for n in range(0, len(terms), per_line):
        chunk = " ".join(terms[n:n + per_line])
        lines.append((prefix + " " if n == 0 else "   ") + chunk)
    return lines


def _export_lp(model, vn, rn, obj_name, offset_var) -> str:
    out = [f"\\ Problem name: {model.name}", "Minimize" if model.sense == "min" else "Maximize"]
    obj_coefs = sorted((i, v) for i, v in model.objective.terms.items() if v != 0.0)
    terms = _lp_terms(obj_coefs, vn)
    if offset_var:
        terms.append(f"{'-' if model.objective.const < 0 else '+'} {_fmt(abs(model.objective.const))} {offset_var}")
        if terms[0].startswith("+ "):
            terms[0] = terms[0][2:]
    out += _wrap(f" {obj_name}:", terms)
    out.append("Subject To")
    for r, name in zip(model.rows, rn):
        lines = _wrap(f" {name}:", _lp_terms(r.coefs, vn))
        op = {"<=": "<=", ">=": ">=", "==": "="}[r.sense]
        lines[-1] += f" {op} {_fmt(r.rhs)}"
        out += lines
    for n, bad in enumerate(model.infeasible_rows):
        out.append(f" infeasible_{n}: 0 {vn[0] if vn else offset_var or 'x'} >= 1")
    bounds = []
    for name, lo, hi, b in zip(vn, model.lb, model.ub, model.is_int):
        if b and lo == 0.0 and hi == 1.0:
            continue
        if lo == hi:
            bounds.append(f" {name} = {_fmt(lo)}")
        elif lo == -INF and hi == INF:
            bounds.append(f" {name} free")
        elif lo == 0.0 and hi == INF:
            continue
        else:
            lo_s = "-inf" if lo == -INF else _fmt(lo)
            hi_s = "+inf" if hi == INF else _fmt(hi)
            bounds.append(f" {lo_s} <= {name} <= {hi_s}")
    if offset_var:
        bounds.append(f" {offset_var} = 1")
    if model.num_vars or offset_var:
        out.append("Bounds")
        out += bounds
    bins = [n for n, b, lo, hi in zip(vn, model.is_int, model.lb, model.ub) if b and lo == 0.0 and hi == 1.0]
    gens = [n for n, b, lo, hi in zip(vn, model.is_int, model.lb, model.ub) if b and not (lo == 0.0 and hi == 1.0)]
    if bins:
        out.append("Binaries")
        out += _wrap("", bins, per_line=8)
    if gens:
        out.append("General")
        out += _wrap("", gens, per_line=8)
    out.append("End")
    return "\n".join(line.rstrip() for line in out) + "\n"


def _export_mps(model, vn, rn, obj_name, offset_var) -> str:
    out = [f"NAME {model.name}"]
    if model.sense == "max":
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(f" N  {obj_name}")
    tag = {"<=": "L", ">=": "G", "==": "E"}
    for r, name in zip(model.rows, rn):
        out.append(f" {tag[r.sense]}  {name}")
    cols: list[list[tuple[str, float]]] = [[] for _ in range(model.num_vars)]
    for i, v in model.objective.terms.items():
        if v != 0.0:
            cols[i].append((obj_name, v))
    for r, name in zip(model.rows, rn):
        for i, v in r.coefs:
            cols[i].append((name, v))
    if model.num_vars or offset_var:
        out.append("COLUMNS")
    in_int = False
    for i, name in enumerate(vn):
        if model.is_int[i] != in_int:
            out.append(f"    MARKER    'MARKER'    '{'INTORG' if model.is_int[i] else 'INTEND'}'")
            in_int = model.is_int[i]
        entries = cols[i] or [(obj_name, 0.0)]
        for rname, v in entries:
            out.append(f"    {name}  {rname}  {_fmt(v)}")
    if in_int:
        out.append("    MARKER    'MARKER'    'INTEND'")
    if offset_var:
        out.append(f"    {offset_var}  {obj_name}  {_fmt(model.objective.const)}")
    rhs = [(name, r.rhs) for r, name in zip(model.rows, rn) if r.rhs != 0.0]
    if rhs:
        out.append("RHS")
        out += [f"    RHS  {name}  {_fmt(v)}" for name, v in rhs]
    bounds = []
    for name, lo, hi, b in zip(vn, model.lb, model.ub, model.is_int):
        if lo == hi:
            bounds.append(f" FX BND  {name}  {_fmt(lo)}")
            continue
        if lo == -INF and hi == INF:
            bounds.append(f" FR BND  {name}")
            continue
        if lo == -INF:
            bounds.append(f" MI BND  {name}")
        elif lo != 0.0:
            bounds.append(f" LO BND  {name}  {_fmt(lo)}")
        if hi != INF:
            bounds.append(f" UP BND  {name}  {_fmt(hi)}")
    if offset_var:
        bounds.append(f" FX BND  {offset_var}  1")
    if bounds:
        out.append("BOUNDS")
        out += bounds
    out.append("ENDATA")
    return "\n".join(out) + "\n"
