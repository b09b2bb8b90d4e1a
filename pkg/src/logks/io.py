"""Ledger CSV, snapshot files and report emission.

Ledger columns (fixed order)::

    step, t, dt, mass_u, mass_sink, mass_source, min_v, max_u, max_z,
    ledger_residual, cfl_ratio, status, margin:<monitor>.<check> ...

Row 0 is the initial state (dt = 0).  Floats are written with 17
significant digits so identical runs give byte-identical files.

Snapshot files (``snap_<step>.bin`` / ``.csv``) start with one ASCII header
line::

    # logks-snapshot v1 t=<float> cells=<nx>[,<ny>] lengths=<Lx>[,<Ly>] params=<hash> dtype=<f8|csv>

The binary body is little-endian float64: all u values in row-major order
(x fastest), then all v values.  The CSV body has a ``u,v`` header and one
row per cell in the same order.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from . import sources
from .model import Scenario
from .monitors import MonitorReport
from .stepper import State, Trajectory

LEDGER_COLUMNS = ["step", "t", "dt", "mass_u", "mass_sink", "mass_source", "min_v",
                  "max_u", "max_z", "ledger_residual", "cfl_ratio", "status"]
MONITOR_COLUMNS = ["monitor", "check", "status", "worst_margin", "worst_t", "worst_x",
                   "tolerance", "strict", "h", "dt_max_used"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def params_hash(s: Scenario) -> str:
    doc = {
        "lengths": list(s.grid.lengths), "cells": list(s.grid.cells),
        "chi": s.params.chi, "sigma": s.params.sigma, "lambda": s.params.lam,
        "u0": sources.to_dict(s.u0), "v0": sources.to_dict(s.v0),
        "phi": sources.to_dict(s.phi), "psi": sources.to_dict(s.psi),
    }
    blob = json.dumps(doc, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _per_step_margins(traj: Trajectory, reports: Sequence[MonitorReport]):
    """Margins of per-step checks, aligned with the ledger rows by time."""
    times = traj.times
    cols = {}
    for rep in reports:
        for chk in rep.checks:
            if len(chk.times) < 2:
                continue
            col = np.full(len(times), math.nan)
            lookup = {float(t): m for t, m in zip(chk.times, chk.margins)}
            for i, t in enumerate(times):
                if float(t) in lookup:
                    col[i] = lookup[float(t)]
            cols[f"margin:{rep.name}.{chk.name}"] = col
    return cols


def write_ledger(path, traj: Trajectory, reports: Sequence[MonitorReport] = ()) -> None:
    margins = _per_step_margins(traj, reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS + list(margins))
        for i, r in enumerate(traj.reports):
            row = [i, r.t, r.dt_used, r.mass_u, r.mass_sink, r.mass_source, r.min_v,
                   r.max_u, r.max_z, r.ledger_residual, r.cfl_ratio, r.status]
            row += [margins[k][i] for k in margins]
            w.writerow([fmt(x) for x in row])


def read_ledger(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_monitor_rows(path, reports: Sequence[MonitorReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MONITOR_COLUMNS)
        for rep in reports:
            if not rep.checks:
                w.writerow([rep.name, "", rep.status, "", "", "", "", "", "", ""])
            for c in rep.checks:
                w.writerow([rep.name, c.name, "pass" if c.passed else "fail",
                            fmt(c.worst_margin), fmt(c.worst_time),
                            " ".join(fmt(x) for x in c.worst_location), fmt(c.tolerance),
                            str(c.strict).lower(), fmt(rep.metadata.get("h", math.nan)),
                            fmt(rep.metadata.get("dt_max_used", math.nan))])


def report_text(reports: Iterable[MonitorReport]) -> str:
    return "\n".join(line for rep in reports for line in rep.lines()) + "\n"


def snapshot_header(s: Scenario, state: State, fmt_name: str) -> str:
    g = s.grid
    return ("# logks-snapshot v1 t={} cells={} lengths={} params={} dtype={}\n".format(
        fmt(state.t), ",".join(str(n) for n in g.cells),
        ",".join(fmt(L) for L in g.lengths), params_hash(s),
        "f8" if fmt_name == "binary" else "csv"))


def write_snapshot(path, s: Scenario, state: State, fmt_name: str = "binary") -> None:
    header = snapshot_header(s, state, fmt_name).encode("ascii")
    u = np.ascontiguousarray(state.u, dtype="<f8").ravel()
    v = np.ascontiguousarray(state.v, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(header)
        if fmt_name == "binary":
            fh.write(u.tobytes())
            fh.write(v.tobytes())
        else:
            buf = _io.StringIO()
            buf.write("u,v\n")
            for a, b in zip(u, v):
                buf.write(f"{fmt(a)},{fmt(b)}\n")
            fh.write(buf.getvalue().encode("ascii"))


def read_snapshot(path):
    """Return ``(header_dict, u, v)`` with arrays shaped like the grid."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    fields = raw[:nl].decode("ascii").split()[3:]
    head = dict(f.split("=", 1) for f in fields)
    cells = tuple(int(n) for n in head["cells"].split(","))
    shape = tuple(reversed(cells))
    n = int(np.prod(cells))
    body = raw[nl + 1:]
    if head["dtype"] == "f8":
        data = np.frombuffer(body, dtype="<f8")
        u, v = data[:n], data[n:2 * n]
    else:
        rows = np.loadtxt(_io.StringIO(body.decode("ascii")), delimiter=",", skiprows=1, ndmin=2)
        u, v = rows[:, 0], rows[:, 1]
    head["t"] = float(head["t"])
    return head, u.reshape(shape).copy(), v.reshape(shape).copy()


def write_snapshots(directory, s: Scenario, traj: Trajectory, fmt_name: str) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "bin" if fmt_name == "binary" else "csv"
    step_of = {float(t): i for i, t in enumerate(traj.times)}
    paths = []
    for state in traj.snapshots:
        p = directory / f"snap_{step_of.get(float(state.t), 0):08d}.{ext}"
        write_snapshot(p, s, state, fmt_name)
        paths.append(p)
    return paths
