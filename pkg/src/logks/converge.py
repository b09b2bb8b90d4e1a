"""Three-level refinement studies for the stepper.

Orders come from successive differences (Richardson): with solutions
``w0, w1, w2`` on levels refined by 2, ``p = log2(|w1 - w0| / |w2 - w1|)``.
Spatial levels share one fixed step; temporal levels share one grid.  Fine
fields are restricted to the coarse grid by averaging the ``2^d`` children,
which is consistent to second order for cell averages.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .model import Scenario
from .stepper import OK, run

EXACT_RTOL = 1e-12
DIFFUSION_SPATIAL_MIN = 1.8
UPWIND_SPATIAL_MIN = 0.8


@dataclass
class Study:
    kind: str
    levels: List[str]
    differences: List[float]
    order: Optional[float]
    exact: bool
    threshold: float

    @property
    def passed(self) -> bool:
        return self.exact or (self.order is not None and self.order >= self.threshold)


@dataclass
class ConvergenceReport:
    regime: str
    spatial: Study
    temporal: Study

    @property
    def passed(self) -> bool:
        return self.spatial.passed and self.temporal.passed

    def lines(self) -> List[str]:
        out = [f"[converge] regime: {self.regime}"]
        for st in (self.spatial, self.temporal):
            if st.exact:
                verdict = "exact (differences at rounding level, order undefined)"
            else:
                verdict = f"order {st.order:.3f} (threshold {st.threshold:g})"
            out.append(f"  {st.kind}: {verdict}: {'pass' if st.passed else 'FAIL'}")
            for lev, diff in zip(st.levels[1:], st.differences):
                out.append(f"    |w({lev}) - w(prev)| = {diff:.6e}")
        if self.regime == "upwind":
            out.append("  note: first-order spatial convergence is expected for the upwind flux")
        return out


def restrict(fine: np.ndarray, d: int) -> np.ndarray:
    """Average 2^d children onto the parent cell."""
    if d == 1:
        return 0.5 * (fine[0::2] + fine[1::2])
    return 0.25 * (fine[0::2, 0::2] + fine[1::2, 0::2] + fine[0::2, 1::2] + fine[1::2, 1::2])


def _terminal(s: Scenario):
    traj = run(s)
    if traj.status != OK:
        raise RuntimeError(f"refinement level {s.grid.cells} failed: {traj.status} {traj.message}")
    return traj.final.u, traj.final.v


def _norm(a_u, a_v, b_u, b_v) -> float:
    return float(max(np.abs(a_u - b_u).max(), np.abs(a_v - b_v).max()))


def _order(diffs: List[float], scale: float):
    if max(diffs) <= EXACT_RTOL * max(scale, 1.0):
        return None, True
    a, b = diffs[-2], diffs[-1]
    if b <= 0.0:
        return math.inf, False
    return math.log2(a / b), False


def spatial_study(s: Scenario, levels: int, dt: float, threshold: float) -> Study:
    solver = dataclasses.replace(s.solver, fixed_dt=dt)
    sols, names = [], []
    for k in range(levels):
        grid = s.grid.refined(2 ** k)
        u, v = _terminal(dataclasses.replace(s, grid=grid, solver=solver, snapshot_every=0))
        sols.append((u, v))
        names.append("x".join(str(n) for n in grid.cells))
    d = s.grid.dimension
    diffs = []
    for k in range(1, levels):
        fu, fv = sols[k]
        cu, cv = sols[k - 1]
        diffs.append(_norm(restrict(fu, d), restrict(fv, d), cu, cv))
    scale = max(float(np.abs(np.concatenate([w.ravel() for w in sols[0]])).max()), 1e-300)
    order, exact = _order(diffs, scale)
    return Study("spatial", names, diffs, order, exact, threshold)


def temporal_study(s: Scenario, levels: int, dt: float, threshold: float = 0.9) -> Study:
    sols, names = [], []
    for k in range(levels):
        step = dt / 2 ** k
        solver = dataclasses.replace(s.solver, fixed_dt=step)
        sols.append(_terminal(dataclasses.replace(s, solver=solver, snapshot_every=0)))
        names.append(f"dt={step:g}")
    diffs = [_norm(*sols[k], *sols[k - 1]) for k in range(1, levels)]
    scale = max(float(np.abs(np.concatenate([w.ravel() for w in sols[0]])).max()), 1e-300)
    order, exact = _order(diffs, scale)
    return Study("temporal", names, diffs, order, exact, threshold)


def converge(s: Scenario, regime: str = "diffusion", levels: int = 3, base_dt: float = 1e-3,
             spatial_order_min: Optional[float] = None,
             temporal_order_min: float = 0.9) -> ConvergenceReport:
    if spatial_order_min is None:
        spatial_order_min = DIFFUSION_SPATIAL_MIN if regime == "diffusion" else UPWIND_SPATIAL_MIN
    spatial = spatial_study(s, levels, base_dt, spatial_order_min)
    temporal = temporal_study(s, levels, base_dt, temporal_order_min)
    return ConvergenceReport(regime, spatial, temporal)


__all__ = ["ConvergenceReport", "Study", "converge", "restrict", "spatial_study",
           "temporal_study"]
