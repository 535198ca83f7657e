"""Command-line front end: ``pcss run|check|sweep|validate``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from . import analysis
from .engine import SimConfig, Simulation, taskset_fingerprint
from .model import SimulationError, SpecError, TaskSet
from .trace import Trace, TraceFormatError
from .workload import GenParams, TaskSetError, generate, load_spec_file, parse_fraction

STEAL_FLAGS = {"on": "deadline-compare", "off": "off", "queue-empty-only": "queue-empty-only"}


class CliError(Exception):
    pass


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise CliError(f"bad range {text!r} (expected LO-HI)") from None


def parse_gen(text: str, m: int, seed: int) -> GenParams:
    """``n=4,U=3/2[,par=0-3][,periods=10-100][,iso=1/2][,sporadic=1/2]``."""
    fields = {}
    for part in text.split(","):
        k, sep, v = part.partition("=")
        if not sep:
            raise CliError(f"--gen: expected key=value, got {part!r}")
        fields[k.strip()] = v.strip()
    known = {"n", "U", "par", "periods", "iso", "sporadic"}
    extra = sorted(set(fields) - known)
    if extra:
        raise CliError(f"--gen: unknown key(s) {extra}; known: {sorted(known)}")
    if "n" not in fields or "U" not in fields:
        raise CliError("--gen needs at least n=.. and U=..")
    try:
        n = int(fields["n"])
    except ValueError:
        raise CliError(f"--gen: n must be an integer, got {fields['n']!r}") from None
    kw = {}
    if "par" in fields:
        kw["parallelism"] = _range(fields["par"])
    if "periods" in fields:
        kw["period_range"] = _range(fields["periods"])
    if "iso" in fields:
        kw["p_isolated"] = parse_fraction(fields["iso"])
    if "sporadic" in fields:
        kw["p_sporadic"] = parse_fraction(fields["sporadic"])
    return GenParams(n, parse_fraction(fields["U"]), m, seed=seed, **kw)


def _taskset(args) -> TaskSet:
    if args.taskset:
        return load_spec_file(args.taskset)
    if args.gen:
        return generate(parse_gen(args.gen, args.cores, args.seed))
    raise CliError("need --taskset FILE or --gen PARAMS")


def _config(args) -> SimConfig:
    cfg = SimConfig(m=args.cores, horizon=args.horizon, seed=args.seed, policy=args.policy,
                    steal=STEAL_FLAGS[args.steal])
    cfg.validate()
    return cfg


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    cfg = _config(args)
    ts = _taskset(args)
    sim = Simulation(ts, cfg)
    trace = sim.run()
    if args.trace:
        _write(args.trace, trace.dumps())
    doc = analysis.metrics_document(trace, sim.n_events)
    if args.metrics:
        _write(args.metrics, analysis.dumps_metrics(doc))
    if not args.trace and not args.metrics:
        print(f"tasks={len(ts)} U={ts.total_utilization} m={cfg.m} horizon={cfg.horizon} "
              f"records={len(trace)} misses={doc['misses']}")
    return 0


def cmd_check(args) -> int:
    trace = Trace.load(args.trace)
    reports = [analysis.check_edf(trace), analysis.check_deques(trace),
               analysis.check_monotone(trace)]
    if args.taskset or args.gen:
        if args.gen:
            args.cores = trace.m
            args.seed = int(trace.meta.get("seed", 0))
        ts = _taskset(args)
        fp = taskset_fingerprint(ts)
        if trace.meta.get("taskset") not in (None, fp):
            raise CliError(f"task set {fp} does not match the trace ({trace.meta.get('taskset')})")
        reports = [analysis.check_isolation(trace, ts), analysis.check_rules(trace, ts)] + reports
    else:
        print("note: no task set given, skipping isolation and rule checks", file=sys.stderr)
    for rep in reports:
        print(rep)
    return 0 if all(r.ok for r in reports) else 1


def _sweep_point(job):
    U, par, seed, n, m, horizon, policy, steal = job
    ts = generate(GenParams(n, U, m, par, seed))
    sim = Simulation(ts, SimConfig(m=m, horizon=horizon, seed=seed, policy=policy, steal=steal,
                                   record_waits=False))
    trace = sim.run()
    stats = analysis.tardiness(trace)
    iso = {t.task_id for t in ts if t.isolated}
    bad = sum(len(r.violations) for r in (analysis.check_isolation(trace, ts),
                                          analysis.check_deques(trace)))
    return {
        "U": str(U), "par": f"{par[0]}-{par[1]}", "seed": seed,
        "gfb": analysis.gfb_sufficient_test(ts, m),
        "jobs": sum(s.released for s in stats.values()),
        "misses": sum(s.misses for s in stats.values()),
        "isolated_misses": sum(s.misses for k, s in stats.items() if k in iso),
        "records": len(trace), "events": sim.n_events, "violations": bad,
    }


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid_U = [parse_fraction(u) for u in args.U.split(",")]
    grid_par = [_range(p) for p in args.par.split(",")]
    jobs = [(U, par, seed, args.n, cfg.m, cfg.horizon, cfg.policy, cfg.steal)
            for U in grid_U for par in grid_par for seed in range(args.seed, args.seed + args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))  # map keeps parameter order
    else:
        rows = [_sweep_point(j) for j in jobs]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["U"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _write(args.out, buf.getvalue())
    return 0 if all(r["violations"] == 0 for r in rows) else 1


def cmd_validate(args) -> int:
    ts = load_spec_file(args.taskset)
    print(f"ok: {len(ts)} task(s), U={ts.total_utilization}, "
          f"{sum(1 for t in ts if t.isolated)} isolated, fingerprint {taskset_fingerprint(ts)}")
    return 0


# -------------------------------------------------------------------- parser


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cores", type=int, default=1, metavar="M")
    p.add_argument("--horizon", type=int, default=1000, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--policy", choices=("cbs", "css", "pcss"), default="pcss")
    p.add_argument("--steal", choices=tuple(STEAL_FLAGS), default="on")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pcss", description="Simulate p-CSS servers on m cores and check the traces.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="simulate one task set")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--taskset", metavar="FILE")
    src.add_argument("--gen", metavar="PARAMS", help="e.g. n=4,U=3/2,par=0-3")
    _sim_flags(p)
    p.add_argument("--trace", metavar="OUT", help="trace file ('-' for stdout)")
    p.add_argument("--metrics", metavar="OUT", help="metrics JSON ('-' for stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="run the trace checkers")
    p.add_argument("trace")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--taskset", metavar="FILE")
    g.add_argument("--gen", metavar="PARAMS")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="seeded batch over a U x parallelism grid")
    p.add_argument("--U", default="1/2,1", help="comma-separated utilizations")
    p.add_argument("--par", default="0-0,0-3", help="comma-separated pjob count ranges")
    p.add_argument("--n", type=int, default=4, help="tasks per set")
    p.add_argument("--seeds", type=int, default=5, help="seeds per grid point")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", default="-", metavar="CSV")
    _sim_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="parse a task-set file")
    p.add_argument("taskset")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except TaskSetError as e:
        for msg in e.problems:
            print(f"error: {msg}", file=sys.stderr)
    except (SpecError, CliError, TraceFormatError, SimulationError) as e:
        print(f"error: {e}", file=sys.stderr)
    except OSError as e:
        print(f"error: {e.filename or ''}: {e.strerror}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
