"""Exploratory phase diagram: bisection in chi on the "survives to horizon" predicate.

The proven column is the threshold formula; the empirical boundary is only a
numerical observation at a finite horizon and resolution, and every output
row says so.
"""
from __future__ import annotations

import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from . import io
from .config import ScenarioCfg, SweepCellCfg, SweepCfg, build_scenario, parse_scenario
from .model import chi_threshold
from .stepper import OK, run

logger = logging.getLogger(__name__)

EXPLORATORY = "exploratory (finite-horizon numerical observation)"


@dataclass
class Probe:
    chi: float
    status: str
    t_end: float


@dataclass
class SweepCellResult:
    dimension: int
    lam: float
    sigma: float
    data_scale: float
    chi_proven: float
    chi_star: Optional[float]
    probes: List[Probe] = field(default_factory=list)
    note: str = ""
    horizon: float = 0.0
    resolution: float = 0.0

    @property
    def bracketed(self) -> bool:
        return self.chi_star is not None


def _scale_source(src: dict, factor: float) -> dict:
    src = dict(src)
    kind = src["kind"]
    if kind == "constant":
        src["value"] *= factor
    elif kind == "gaussian_bump":
        src["background"] = src.get("background", 0.0) * factor
        src["amplitude"] *= factor
    elif kind == "cosine_mode":
        src["mean"] *= factor
        src["amplitude"] *= factor
    else:
        src["base"] = _scale_source(src["base"], factor)
        src["target"] *= factor
    return src


def _fit_source(src: Optional[dict], d: int, lengths) -> Optional[dict]:
    """Project or extend per-axis parameters of a source onto ``d`` axes."""
    if src is None:
        return None
    src = dict(src)
    if src["kind"] == "gaussian_bump":
        c = list(src["center"])
        src["center"] = (c + [L / 2 for L in lengths[len(c):]])[:d]
    elif src["kind"] == "cosine_mode":
        m = list(src["modes"])
        src["modes"] = (m + [0] * d)[:d]
    elif src["kind"] == "separable_time_decay":
        src["base"] = _fit_source(src["base"], d, lengths)
    return src


def cell_scenario_cfg(base: ScenarioCfg, cell: SweepCellCfg, sweep: SweepCfg,
                      chi: float) -> ScenarioCfg:
    doc = base.model_dump(by_alias=True, exclude_none=True)
    doc = copy.deepcopy(doc)
    d = cell.dimension
    g = doc["grid"]
    lengths = (list(g["lengths"]) * 2)[:d]
    cells = (list(g["cells"]) * 2)[:d]
    if sweep.grid_cells is not None:
        cells = [sweep.grid_cells] * d
    doc["grid"] = {"dimension": d, "lengths": lengths, "cells": cells}
    doc["params"] = {"chi": chi, "sigma": cell.sigma, "lambda": cell.lambda_}
    srcs = doc["sources"]
    for key in list(srcs):
        srcs[key] = _fit_source(srcs[key], d, lengths)
    srcs["u0"] = _scale_source(srcs["u0"], cell.data_scale)
    srcs.pop("psi_inf", None)
    doc["horizon"] = sweep.horizon
    doc["name"] = f"{sweep.name}_d{d}_lam{cell.lambda_:g}_sig{cell.sigma:g}_s{cell.data_scale:g}"
    doc["outputs"] = {"snapshot_every": 0}
    return parse_scenario(doc)


def run_probe(base: ScenarioCfg, cell: SweepCellCfg, sweep: SweepCfg, chi: float,
              out_dir: Optional[Path] = None) -> Probe:
    cfg = cell_scenario_cfg(base, cell, sweep, chi)
    scenario = build_scenario(cfg)
    traj = run(scenario)
    if out_dir is not None:
        probe_dir = out_dir / cfg.name / f"chi_{chi:.10g}"
        probe_dir.mkdir(parents=True, exist_ok=True)
        io.write_ledger(probe_dir / "ledger.csv", traj)
    return Probe(chi, traj.status, traj.final.t)


def bisect_cell(base: ScenarioCfg, cell: SweepCellCfg, sweep: SweepCfg,
                out_dir: Optional[Path] = None) -> SweepCellResult:
    res = SweepCellResult(cell.dimension, cell.lambda_, cell.sigma, cell.data_scale,
                          chi_threshold(cell.dimension, cell.lambda_), None,
                          horizon=sweep.horizon, resolution=sweep.resolution)

    def probe(chi):
        p = run_probe(base, cell, sweep, chi, out_dir)
        res.probes.append(p)
        logger.info("d=%d lam=%g sigma=%g chi=%.6g -> %s", cell.dimension, cell.lambda_,
                    cell.sigma, chi, p.status)
        return p.status == OK

    lo, hi = sweep.chi_lo, sweep.chi_hi
    alive_lo, alive_hi = probe(lo), probe(hi)
    if alive_lo and alive_hi:
        res.note = "no boundary in bracket (all probes survive)"
        return res
    if not alive_lo and not alive_hi:
        res.note = "no boundary in bracket (all probes fail)"
        return res
    if not alive_lo:
        res.note = "survival not monotone at bracket ends (low end fails, high end survives)"
        return res
    while hi - lo > sweep.resolution:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    res.chi_star = 0.5 * (lo + hi)
    res.note = EXPLORATORY
    return res


def run_sweep(sweep: SweepCfg, base: ScenarioCfg, threads: int = 1,
              out_dir: Optional[Path] = None) -> List[SweepCellResult]:
    """Bisect every cell; cells run concurrently, results keep the config order."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(bisect_cell, base, cell, sweep, out_dir) for cell in sweep.cells]
        return [f.result() for f in futures]


TABLE_COLUMNS = ["d", "lambda", "sigma", "data_scale", "chi_threshold", "chi_star",
                 "horizon", "resolution", "probes", "note"]


def table_rows(results: List[SweepCellResult]) -> List[Tuple]:
    rows = []
    for r in results:
        probes = " ".join(f"{p.chi:.6g}:{p.status}" for p in sorted(r.probes, key=lambda p: p.chi))
        rows.append((r.dimension, r.lam, r.sigma, r.data_scale, r.chi_proven,
                     "" if r.chi_star is None else r.chi_star, r.horizon, r.resolution,
                     probes, r.note))
    return rows
