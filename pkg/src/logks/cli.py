"""Command-line entry point: ``logks {run,certify,sweep,converge,asymptotics} FILE``.

Exit codes: 0 success, 2 config error, 3 simulation failure, 4 monitor
violation (or, for ``certify``, no global-existence result applies).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__, io
from .config import ConfigError, load_scenario, load_sweep
from .converge import converge
from .elliptic import solve_helmholtz_neumann
from .model import Certificate, certify, chi_threshold
from .monitors import run_monitors
from .sources import sample
from .stepper import OK, ScenarioError, run
from .sweep import EXPLORATORY, TABLE_COLUMNS, run_sweep, table_rows

logger = logging.getLogger("logks")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_MONITOR = 4


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def _failure_block(kind: str, message: str, **extra) -> None:
    block = {"failure": kind, "message": message, **extra}
    print(json.dumps(_jsonable(block), sort_keys=True), file=sys.stderr)


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.outputs.directory:
        return Path(cfg.outputs.directory)
    return Path("runs") / cfg.name


def _load(path):
    try:
        return load_scenario(path)
    except ConfigError as exc:
        _failure_block("config", str(exc), file=str(path))
        return None


def _simulate(args, attach: Optional[List[str]] = None):
    """Shared body of ``run`` and ``asymptotics``; returns an exit code."""
    loaded = _load(args.file)
    if loaded is None:
        return EXIT_CONFIG
    cfg, scenario = loaded
    if args.snapshots is not None:
        scenario = dataclasses.replace(scenario, snapshot_every=args.snapshots)
    names = list(scenario.monitors.attach)
    for extra in attach or ():
        if extra not in names:
            names.append(extra)
    kind, certs = certify(scenario)
    cert = _barrier_certificate(certs)
    try:
        traj = run(scenario)
    except ScenarioError as exc:
        _failure_block("config", f"scenario violates the standing assumptions: {exc}",
                       file=str(args.file))
        return EXIT_CONFIG
    reports = run_monitors(traj, names, cert)

    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    io.write_ledger(out / "ledger.csv", traj, reports)
    io.write_monitor_rows(out / "monitors.csv", reports)
    if scenario.snapshot_every:
        io.write_snapshots(out / "snapshots", scenario, traj, cfg.outputs.snapshot_format)
    summary = {
        "scenario": scenario.name, "status": traj.status, "message": traj.message,
        "t_final": traj.final.t, "steps": traj.steps, "certificate": kind,
        "monitors": [{"name": r.name, "status": r.status, "metadata": r.metadata,
                      "checks": [{"name": c.name, "passed": c.passed,
                                  "worst_margin": c.worst_margin, "worst_t": c.worst_time,
                                  "worst_x": list(c.worst_location), "tolerance": c.tolerance,
                                  "strict": c.strict} for c in r.checks]}
                     for r in reports],
    }
    (out / "report.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    text = (f"scenario: {scenario.name}\nstatus: {traj.status}"
            + (f" ({traj.message})" if traj.message else "")
            + f"\nt_final: {traj.final.t:.17g}\nsteps: {traj.steps}\n" + io.report_text(reports))
    (out / "report.txt").write_text(text)
    print(text, end="")

    if traj.status != OK:
        _failure_block("simulation", traj.message, status=traj.status, t=traj.final.t)
        return EXIT_SIMULATION
    failed = [r.name for r in reports if r.status == "fail"]
    if failed:
        _failure_block("monitor", "monitor violation", monitors=failed)
        return EXIT_MONITOR
    return EXIT_OK


def _barrier_certificate(certs: List[Certificate]) -> Optional[Certificate]:
    for c in certs:
        if c.applies:
            return c
    return None


def cmd_run(args) -> int:
    return _simulate(args)


def cmd_asymptotics(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return EXIT_CONFIG
    _, scenario = loaded
    spec = scenario.psi_inf if scenario.psi_inf is not None else scenario.psi.limit()
    _, stats = solve_helmholtz_neumann(scenario.grid, sample(spec, scenario.grid), 1e-12)
    print(f"v_inf solve: iterations {stats.iterations}, relative residual {stats.residual:.3e}")
    return _simulate(args, attach=["asymptotics"])


def cmd_certify(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return EXIT_CONFIG
    _, scenario = loaded
    kind, certs = certify(scenario)
    d, p = scenario.grid.dimension, scenario.params
    print(f"scenario: {scenario.name}")
    print(f"d = {d}, chi = {p.chi:.17g}, sigma = {p.sigma:.17g}, lambda = {p.lam:.17g}")
    print(f"chi threshold = {chi_threshold(d, p.lam):.17g}")
    for c in certs:
        print("\n".join(c.lines()))
    if kind == "theorem1":
        print("applies: Theorem 1 (no smallness needed)")
    elif kind == "theorem2":
        print("applies: Theorem 2")
    elif kind == "theorem3":
        print("applies: Theorem 3")
    else:
        reasons = [f"{c.theorem}: {c.reason or 'conditions fail'}" for c in certs]
        print("applies: none (neither small-data theorem applies and chi exceeds the threshold)")
        for r in reasons:
            print(f"  {r}")
        return EXIT_MONITOR
    return EXIT_OK


def cmd_converge(args) -> int:
    loaded = _load(args.file)
    if loaded is None:
        return EXIT_CONFIG
    cfg, scenario = loaded
    c = cfg.convergence
    try:
        rep = converge(scenario, c.regime, c.levels, c.base_dt, c.spatial_order_min,
                       c.temporal_order_min)
    except RuntimeError as exc:
        _failure_block("simulation", str(exc))
        return EXIT_SIMULATION
    print("\n".join(rep.lines()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "converge.txt").write_text("\n".join(rep.lines()) + "\n")
    return EXIT_OK if rep.passed else EXIT_MONITOR


def cmd_sweep(args) -> int:
    try:
        sweep, base = load_sweep(args.file)
    except ConfigError as exc:
        _failure_block("config", str(exc), file=str(args.file))
        return EXIT_CONFIG
    out = Path(args.out) if args.out else None
    results = run_sweep(sweep, base, threads=args.threads, out_dir=out)
    rows = table_rows(results)
    print(f"# chi_star is {EXPLORATORY}; horizon {sweep.horizon:g}, resolution {sweep.resolution:g}")
    print("\t".join(TABLE_COLUMNS))
    for row in rows:
        print("\t".join(io.fmt(x) if not isinstance(x, str) else x for x in row))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_COLUMNS)
            for row in rows:
                w.writerow([io.fmt(x) if not isinstance(x, str) else x for x in row])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logks", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "run": (cmd_run, "integrate a scenario and check the attached monitors"),
        "certify": (cmd_certify, "evaluate the global-existence hypotheses"),
        "sweep": (cmd_sweep, "exploratory chi bisection over parameter cells"),
        "converge": (cmd_converge, "three-level refinement study"),
        "asymptotics": (cmd_asymptotics, "run with the long-time convergence monitor"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help="scenario (or sweep) document, YAML or JSON")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--snapshots", metavar="N", type=int,
                       help="write a snapshot every N steps (0 disables)")
        p.add_argument("--threads", metavar="K", type=int, default=1,
                       help="concurrent sweep probes")
        p.add_argument("--seed", metavar="S", type=int, default=0,
                       help="accepted for interface stability; simulations are deterministic")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.snapshots is not None and args.snapshots < 0:
        _failure_block("config", "--snapshots must be >= 0")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
