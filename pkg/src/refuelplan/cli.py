"""Command line entry point: ``refuelplan <command> ...``.

Exit codes: 0 on success, 1 when the problem is infeasible, 2 on any other
error.  Failures print a JSON object ``{"error": ..., "kind": ..., "exit": ...}``
on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from .constructive import (
    ConstructionError,
    RepairError,
    StageInfeasible,
    repair,
    solve_cmsa,
    solve_rrf,
    solve_simplified,
)
from .domain import (
    BaselineError,
    InstanceError,
    Solution,
    aggregate_stats,
    baseline_schedule,
    gap,
    validate,
)
from .formulation import FormulationOptions, build_compact
from .instance_io import (
    FormatError,
    GeneratorConfig,
    GeneratorError,
    derive_ext,
    derive_truncate,
    generate,
    parse_instance,
    parse_solution,
    write_instance,
    write_solution,
)
from .localsearch import VNDConfig, default_policy, run_pipeline, vnd
from .milp import SolveConfig, solve, solve_lp_relaxation
from .oracle import OracleInfeasible, OracleLimitExceeded, OracleLimits, enumerate_optimal
from .preprocessing import InfeasibleInstance, ReductionReport, fix_from_lp, tighten_exact, tighten_max_cycle_length

log = logging.getLogger("refuelplan")

RUN_COLUMNS = ["instance", "method", "seed", "runtime", "status", "financial_cost", "stability_cost",
               "gap", "failed", "restricted", "file"]


class CliFailure(Exception):
    def __init__(self, message: str, code: int = 2, kind: str = "error"):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliFailure(f"cannot read {path}: {exc.strerror}", kind="io") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _load_instance(path: str):
    return parse_instance(_read(path))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(seed=args.seed, n_t2=args.t2, n_t1=args.t1, n_cycles=args.cycles, weeks=args.weeks,
                          tw_width=args.tw_width, n_resource_constraints=args.resources,
                          optional_tail=args.optional_tail, stretch_profiles=args.profiles,
                          name=args.name or f"gen_s{args.seed}")
    _write(args.out, write_instance(generate(cfg)))
    return 0


def cmd_derive(args) -> int:
    inst = _load_instance(args.input)
    if args.ext is not None:
        out = derive_ext(inst, args.ext)
    else:
        try:
            k, w = (int(v) for v in args.truncate.split(","))
        except ValueError:
            raise CliFailure("--truncate expects K,W", kind="usage") from None
        out = derive_truncate(inst, k, w)
    _write(args.out, write_instance(out))
    return 0


def cmd_preprocess(args) -> int:
    inst = _load_instance(args.input)
    report = ReductionReport(binaries_before=inst.binary_count(), binaries_after=inst.binary_count())
    if args.exact:
        inst, rep = tighten_exact(inst)
        report = report.merge(rep)
    if args.max_cycle_len is not None:
        inst, rep = tighten_max_cycle_length(inst, args.max_cycle_len)
        report = report.merge(rep)
    if args.lp_fix:
        model, vm = build_compact(inst)
        lp = solve_lp_relaxation(model, SolveConfig(time_limit=args.time_limit))
        if not lp.has_solution:
            raise CliFailure(f"linear relaxation: {lp.status}", code=1 if lp.status == "infeasible" else 2,
                             kind="infeasible" if lp.status == "infeasible" else "solver")
        inst, rep = fix_from_lp(inst, lp.values, vm)
        report = report.merge(rep)
    report.binaries_after = inst.binary_count()
    _write(args.out, write_instance(inst))
    if args.report:
        _write(args.report, report.to_csv())
    return 0


def _solve_config(args) -> SolveConfig:
    return SolveConfig(time_limit=args.time_limit, rel_gap_tol=args.gap, seed=args.seed)


def _options(args) -> FormulationOptions:
    return FormulationOptions(ct6="light_disaggregated" if args.ct6 == "light" else "off")


def _fallback_repair(inst, time_limit: float, reason: str) -> Solution:
    log.warning("%s; repairing the baseline instead", reason)
    try:
        base = baseline_schedule(inst)
    except BaselineError as exc:
        raise CliFailure(f"{reason}; no baseline to repair ({exc})", code=1, kind="infeasible") from None
    from .constructive import RepairConfig

    sol = repair(base, inst, RepairConfig(time_limit=time_limit))
    sol.meta["fallback"] = reason
    return sol


def cmd_solve(args) -> int:
    inst = _load_instance(args.input)
    cfg = _solve_config(args)
    opts = _options(args)
    warm = parse_solution(_read(args.warmstart), inst) if args.warmstart else None
    t0 = time.perf_counter()
    trace = None
    method = args.method
    if method == "milp":
        model, vm = build_compact(inst, opts)
        out = solve(model, cfg.with_(warmstart=vm.assignment(warm, model) if warm else None))
        if not out.has_solution:
            if out.status == "infeasible":
                raise CliFailure("compact model is infeasible", code=1, kind="infeasible")
            raise CliFailure(f"no solution found ({out.status})", kind="solver")
        from .formulation import extract_solution

        sol = extract_solution(out, vm, check_ct6=opts.ct6 != "off")
        sol.meta.update({"status": out.status, "dual_bound": out.dual_bound})
    elif method == "simplified":
        sol = solve_simplified(inst, cfg)
    elif method == "rrf":
        try:
            sol = solve_rrf(inst, cfg)
        except StageInfeasible as exc:
            sol = _fallback_repair(inst, cfg.time_limit, str(exc))
    elif method == "cmsa":
        sol = solve_cmsa(inst, cfg)
    elif method == "vnd":
        start = warm if warm is not None else solve_cmsa(inst, cfg.with_(time_limit=max(1.0, cfg.time_limit / 4)))
        remaining = max(1.0, cfg.time_limit - (time.perf_counter() - t0))
        pol = default_policy(inst, stopping=args.stopping, wallclock=remaining)
        sol, trace = vnd(inst, start, pol, VNDConfig(options=opts, seed=args.seed))
        sol.meta["method"] = "vnd"
    elif method == "pipeline":
        sol, trace = run_pipeline(inst, time_limit=cfg.time_limit, seed=args.seed, options=opts)
    else:  # argparse restricts choices
        raise CliFailure(f"unknown method {method}", kind="usage")
    viol = validate(sol, inst, check_ct6=opts.ct6 != "off")
    sol = Solution(sol.schedule, sol.dispatch, sol.cost, tuple(viol), sol.meta)
    sol.meta.update({"instance": inst.name, "method": method, "seed": args.seed,
                     "runtime": time.perf_counter() - t0, "restricted": inst.restricted,
                     "ct6": args.ct6})
    sol.meta.setdefault("status", "feasible" if sol.feasible else "violations")
    _write(args.out, write_solution(sol, inst))
    if trace is not None and args.trace:
        _write(args.trace, trace.to_csv())
    if not sol.feasible:
        raise CliFailure(f"solution has {len(viol)} violations", kind="validation")
    return 0


def cmd_pareto(args) -> int:
    from .biobjective import ParetoError, frontier_csv, pareto_frontier

    inst = _load_instance(args.input)
    base = parse_solution(_read(args.baseline), inst).schedule if args.baseline else None
    cfg = SolveConfig(time_limit=args.time_limit, rel_gap_tol=args.gap)
    try:
        points = pareto_frontier(inst, base, args.nmax, cfg)
    except ParetoError as exc:
        raise CliFailure(str(exc), code=1, kind="infeasible") from None
    _write(args.out, frontier_csv(points))
    return 0


def cmd_oracle(args) -> int:
    inst = _load_instance(args.input)
    res = enumerate_optimal(inst, OracleLimits(max_schedules=args.max_schedules))
    if res.solution is None:
        raise OracleInfeasible(f"none of the {res.n_candidates} candidate schedules is feasible")
    sol = res.solution
    sol.meta.update({"instance": inst.name, "n_candidates": res.n_candidates, "n_feasible": res.n_feasible,
                     "restricted": inst.restricted})
    _write(args.out, write_solution(sol, inst))
    print(json.dumps({"objective": sol.objective, "n_candidates": res.n_candidates,
                      "n_feasible": res.n_feasible}), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    inst = _load_instance(args.input)
    sol = parse_solution(_read(args.solution), inst)
    viol = validate(sol, inst, check_ct6=args.ct6)
    c = sol.cost
    doc = {"financial": c.financial, "refuel_cost": c.refuel_cost, "t1_cost": c.t1_cost,
           "final_fuel_credit": c.final_fuel_credit, "stability": c.stability,
           "violations": [str(v) for v in viol]}
    sys.stdout.write(json.dumps(doc, indent=1) + "\n")
    return 0 if not viol else 1


# ---------------------------------------------------------------------------
# report


def _load_bks(path: str | None) -> dict[str, float]:
    if not path or not os.path.exists(path):
        return {}
    out = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "instance":
                continue
            try:
                out[row[0]] = float(row[1])
            except (IndexError, ValueError):
                raise CliFailure(f"malformed BKS row {row!r} in {path}", kind="format") from None
    return out


def _save_bks(path: str, bks: dict[str, float]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "cost"])
    for name in sorted(bks):
        w.writerow([name, repr(bks[name])])
    _write(path, buf.getvalue())


def collect_runs(run_dir: str) -> list[dict]:
    runs = []
    for p in sorted(Path(run_dir).glob("*.json")):
        try:
            doc = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliFailure(f"cannot read run file {p}: {exc}", kind="format") from None
        run = doc.get("run", {})
        ok = "schedule" in doc and not doc.get("violations")
        cost = doc.get("costs", {}).get("financial") if ok else None
        runs.append({"instance": run.get("instance", p.stem), "method": run.get("method", "?"),
                     "seed": run.get("seed", ""), "runtime": run.get("runtime", math.nan),
                     "status": run.get("status", "feasible" if ok else "failed"),
                     "financial_cost": cost, "stability_cost": doc.get("costs", {}).get("stability"),
                     "restricted": bool(run.get("restricted", False)), "file": p.name})
    return runs


def build_report(runs: list[dict], bks: dict[str, float], thresholds: list[float]) -> tuple[str, str, str]:
    """Runs CSV, per-method statistics CSV, and an aligned text table."""
    for r in runs:
        c = r["financial_cost"]
        if c is None or r["restricted"]:
            continue
        if r["instance"] not in bks or c < bks[r["instance"]]:
            bks[r["instance"]] = c
    for r in runs:
        ref = bks.get(r["instance"])
        c = r["financial_cost"]
        r["gap"] = gap(c, ref) if c is not None and ref is not None and ref > 0 else math.inf
        r["failed"] = r["gap"] > 1.0
    rbuf = io.StringIO()
    w = csv.DictWriter(rbuf, RUN_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in runs:
        w.writerow({k: r.get(k) for k in RUN_COLUMNS})
    groups: dict[tuple[str, bool], list[float]] = {}
    for r in runs:
        groups.setdefault((r["method"], r["restricted"]), []).append(r["gap"])
    head = ["method", "restricted", "n", "mean_gap", "std_gap", "q1", "q2", "q3"] + \
           [f"N_{x:g}" for x in thresholds] + ["N_F"]
    rows = []
    for (method, restricted), gaps in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        st = aggregate_stats(gaps, thresholds)
        rows.append([method, "yes" if restricted else "no", st.n, st.mean_gap, st.std_gap, st.q1, st.q2, st.q3]
                    + [st.n_below[float(x)] for x in thresholds] + [st.n_failures])
    sbuf = io.StringIO()
    sw = csv.writer(sbuf, lineterminator="\n")
    sw.writerow(head)
    for row in rows:
        sw.writerow([repr(v) if isinstance(v, float) else v for v in row])
    cells = [head] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(head))]
    lines = []
    for n, row in enumerate(cells):
        if n == 1 or (n > 1 and row[1] != cells[n - 1][1]):
            lines.append("  ".join("-" * wd for wd in widths))
        lines.append("  ".join(c.rjust(wd) for c, wd in zip(row, widths)))
    return rbuf.getvalue(), sbuf.getvalue(), "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    if not os.path.isdir(args.runs):
        raise CliFailure(f"{args.runs} is not a directory", kind="io")
    try:
        thresholds = [float(x) for x in args.thresholds.split(",") if x]
    except ValueError:
        raise CliFailure("--thresholds expects comma separated numbers", kind="usage") from None
    runs = collect_runs(args.runs)
    bks = _load_bks(args.bks)
    runs_csv, stats_csv, text = build_report(runs, bks, thresholds)
    if args.bks:
        _save_bks(args.bks, bks)
    out_dir = Path(args.out) if args.out else Path(args.runs)
    _write(str(out_dir / "runs.csv"), runs_csv)
    _write(str(out_dir / "stats.csv"), stats_csv)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Usage errors are reported as JSON like every other failure."""

    def error(self, message):
        _fail(2, "usage", f"{self.prog}: {message}")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="refuelplan", description="Nuclear refueling and maintenance planning.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded synthetic instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--t2", type=int, default=10)
    g.add_argument("--t1", type=int, default=2)
    g.add_argument("--cycles", type=int, default=3)
    g.add_argument("--weeks", type=int, default=60)
    g.add_argument("--tw-width", type=int, default=6)
    g.add_argument("--resources", type=int, default=2)
    g.add_argument("--optional-tail", action="store_true")
    g.add_argument("--profiles", action="store_true", help="attach stretch profiles")
    g.add_argument("--name")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("derive", help="derive a widened or truncated instance")
    grp = d.add_mutually_exclusive_group(required=True)
    grp.add_argument("--ext", type=int, metavar="K0")
    grp.add_argument("--truncate", metavar="K,W")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_derive)

    pp = sub.add_parser("preprocess", help="shrink outage windows")
    pp.add_argument("--exact", action="store_true")
    pp.add_argument("--max-cycle-len", type=int)
    pp.add_argument("--lp-fix", action="store_true")
    pp.add_argument("--time-limit", type=float, default=300.0)
    pp.add_argument("--in", dest="input", required=True)
    pp.add_argument("--out")
    pp.add_argument("--report")
    pp.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("--method", choices=["milp", "simplified", "rrf", "cmsa", "vnd", "pipeline"], default="pipeline")
    s.add_argument("--time-limit", type=float, default=300.0)
    s.add_argument("--gap", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--warmstart", metavar="FILE")
    s.add_argument("--ct6", choices=["off", "light"], default="off")
    s.add_argument("--stopping", choices=["all_local_min", "wallclock"], default="all_local_min")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--trace", metavar="CSV")
    s.set_defaults(func=cmd_solve)

    pa = sub.add_parser("pareto", help="cost versus moved outages")
    pa.add_argument("--nmax", type=int)
    pa.add_argument("--baseline", metavar="FILE")
    pa.add_argument("--time-limit", type=float, default=300.0)
    pa.add_argument("--gap", type=float, default=1e-6)
    pa.add_argument("--in", dest="input", required=True)
    pa.add_argument("--out")
    pa.set_defaults(func=cmd_pareto)

    o = sub.add_parser("oracle", help="exhaustive optimum of a tiny instance")
    o.add_argument("--max-schedules", type=int, default=200_000)
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("evaluate", help="cost breakdown and violations of a solution file")
    e.add_argument("--solution", required=True)
    e.add_argument("--ct6", action="store_true", help="also check the stretch envelope")
    e.add_argument("--in", dest="input", required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="gap statistics over a directory of run files")
    r.add_argument("--runs", required=True)
    r.add_argument("--bks", metavar="CSV")
    r.add_argument("--thresholds", default="0.0001,0.0005,0.01")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_report)
    return p


_INFEASIBLE = (InfeasibleInstance, OracleInfeasible, RepairError, StageInfeasible)
_ERRORS = (FormatError, InstanceError, GeneratorError, BaselineError, OracleLimitExceeded,
           ConstructionError, ValueError, OSError)


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": message, "kind": kind, "exit": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliFailure as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except _INFEASIBLE as exc:
        return _fail(1, "infeasible", str(exc))
    except _ERRORS as exc:
        return _fail(2, type(exc).__name__, str(exc))
    except Exception as exc:  # last resort: still machine readable
        log.debug("unexpected failure", exc_info=True)
        return _fail(2, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
