"""Lie-split time integration of the coupled (u, v) system.

One step of size dt:

1. explicit stage: upwinded chemotactic flux, the sink ``-sigma u v`` and the
   source ``phi`` for u; the production ``u v^lam + psi`` for v;
2. implicit stage: ``(I - dt Delta_h) u_new = u*`` and
   ``((1 + dt) I - dt Delta_h) v_new = v*`` (the linear decay of v is taken
   together with its diffusion).

Both implicit operators are M-matrices, so the implicit stage keeps u >= 0,
keeps ``min v_new >= min v* / (1 + dt) >= exp(-dt) min v*`` and leaves the
mass of u unchanged.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from .elliptic import SolverError, solve_shifted
from .grid import (FaceData, FloorViolation, GridSpec, divergence, face_gradient,
                   integrate, require_above_floor)
from .model import ModelParams, Scenario, SolverSettings, compute_z, validate_assumption1

logger = logging.getLogger(__name__)

OK = "ok"
BLOWUP = "blowup"
POSITIVITY_FAILURE = "positivity_failure"
FLOOR_HIT = "floor_hit"
STEP_LIMIT = "step_limit"

# relative size of negative values left by an inexact CG solve that are
# treated as rounding (zeroed, mass restored) rather than a positivity failure
CG_NEGATIVE_SLACK = 1e-10


class ScenarioError(ValueError):
    """The scenario violates the standing assumptions on the data."""


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray


@dataclass
class StepReport:
    t: float
    dt_used: float
    mass_u: float
    mass_u_prev: float
    mass_sink: float
    mass_source: float
    min_v: float
    min_v_loc: Tuple[float, ...]
    max_u: float
    max_z: float
    max_z_loc: Tuple[float, ...]
    max_grad_v: float
    phi_max: float
    cfl_ratio: float
    status: str = OK
    message: str = ""
    iterations: int = 0

    @property
    def ledger_residual(self) -> float:
        """Relative residual of ``d/dt int u = -sigma int uv + int phi`` for this step."""
        if self.dt_used <= 0:
            return 0.0
        res = (self.mass_u - self.mass_u_prev) / self.dt_used + self.mass_sink - self.mass_source
        scale = (max(abs(self.mass_u), abs(self.mass_u_prev)) / self.dt_used
                 + abs(self.mass_sink) + abs(self.mass_source))
        return abs(res) / scale if scale > 0 else abs(res)


@dataclass
class Trajectory:
    scenario: Scenario
    initial: State
    final: State
    reports: List[StepReport] = field(default_factory=list)
    snapshots: List[State] = field(default_factory=list)
    status: str = OK
    message: str = ""

    @property
    def complete(self) -> bool:
        return self.status == OK

    @property
    def steps(self) -> int:
        return len(self.reports) - 1

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.series("t")


def advection_flux(grid: GridSpec, u: np.ndarray, v: np.ndarray, chi: float,
                   floor: float = 1e-300) -> FaceData:
    """Face flux ``chi * u_upwind * (grad log v)_face``, zero on the boundary."""
    require_above_floor(v, floor)
    drift = face_gradient(grid, np.log(v))
    out = []
    for k, g in enumerate(drift):
        ax = grid.array_axis(k)
        n = u.shape[ax]
        a = chi * np.take(g, np.arange(1, n), axis=ax)
        left = np.take(u, np.arange(0, n - 1), axis=ax)
        right = np.take(u, np.arange(1, n), axis=ax)
        flux = np.zeros_like(g)
        idx = [slice(None)] * g.ndim
        idx[ax] = slice(1, -1)
        flux[tuple(idx)] = np.where(a >= 0, a * left, a * right)
        out.append(flux)
    return tuple(out)


def _max_drift(grid: GridSpec, v: np.ndarray, chi: float) -> float:
    if chi == 0:
        return 0.0
    return chi * max(float(np.abs(g).max()) for g in face_gradient(grid, np.log(v)))


def choose_dt(grid: GridSpec, state: State, params: ModelParams,
              settings: SolverSettings) -> float:
    """Largest step keeping the explicit stage positivity preserving.

    ``min(safety * min(h / (2 d max|chi grad log v|), 1 / (2 sigma max v)), dt_max)``.
    The caller compares the result with ``dt_min`` (a collapse is blow-up).
    """
    bounds = [settings.dt_max]
    drift = _max_drift(grid, state.v, params.chi)
    if drift > 0:
        bounds.append(settings.safety * min(grid.spacing) / (2 * grid.dimension * drift))
    rate = params.sigma * float(state.v.max())
    if rate > 0:
        bounds.append(settings.safety / (2.0 * rate))
    return min(bounds)


def _cfl_ratio(grid, v, params, dt):
    drift = _max_drift(grid, v, params.chi)
    return dt * (2 * grid.dimension * drift / min(grid.spacing) + params.sigma * float(v.max()))


def diagnose(grid: GridSpec, params: ModelParams, u, v, floor) -> dict:
    iv = int(np.argmin(v))
    z = compute_z(grid, u, v, params, floor)
    iz = int(np.argmax(z))
    gv = face_gradient(grid, v)
    return dict(
        min_v=float(v.flat[iv]), min_v_loc=grid.location(iv),
        max_u=float(u.max()),
        max_z=float(z.flat[iz]), max_z_loc=grid.location(iz),
        max_grad_v=max(float(np.abs(g).max()) for g in gv),
    )


def _failed(t, dt, mass_prev, status, message) -> StepReport:
    nan = math.nan
    return StepReport(t=t, dt_used=dt, mass_u=nan, mass_u_prev=mass_prev, mass_sink=nan,
                      mass_source=nan, min_v=nan, min_v_loc=(), max_u=nan, max_z=nan,
                      max_z_loc=(), max_grad_v=nan, phi_max=nan, cfl_ratio=nan,
                      status=status, message=message)


def step(grid: GridSpec, state: State, params: ModelParams, phi_t: np.ndarray,
         psi_t: np.ndarray, dt: float,
         settings: SolverSettings = SolverSettings()) -> Tuple[State, StepReport]:
    """Advance one step; the report carries the stage values used by the mass ledger."""
    u, v = state.u, state.v
    t_new = state.t + dt
    mass_prev = integrate(grid, u)
    try:
        flux = advection_flux(grid, u, v, params.chi, settings.floor)
    except FloorViolation as exc:
        return state, _failed(t_new, dt, mass_prev, FLOOR_HIT, str(exc))
    sink = params.sigma * u * v
    mass_sink = integrate(grid, sink)
    mass_source = integrate(grid, phi_t)
    u_star = u + dt * (-divergence(grid, flux) - sink + phi_t)
    if not np.all(np.isfinite(u_star)):
        return state, _failed(t_new, dt, mass_prev, BLOWUP, "non-finite u in explicit stage")
    if float(u_star.min()) < 0.0:
        i = int(np.argmin(u_star))
        return state, _failed(t_new, dt, mass_prev, POSITIVITY_FAILURE,
                              f"u = {float(u_star.flat[i])!r} < 0 at {grid.location(i)} "
                              f"after explicit stage")
    v_star = v + dt * (u * v ** params.lam + psi_t)
    if not np.all(np.isfinite(v_star)):
        return state, _failed(t_new, dt, mass_prev, BLOWUP, "non-finite v in explicit stage")
    try:
        u_new, su = solve_shifted(grid, u_star, 1.0, dt, settings.cg_tol,
                                  settings.cg_maxiter, settings.preconditioner)
        v_new, sv = solve_shifted(grid, v_star, 1.0 + dt, dt, settings.cg_tol,
                                  settings.cg_maxiter, settings.preconditioner)
    except SolverError as exc:
        return state, _failed(t_new, dt, mass_prev, BLOWUP, f"diffusion solve failed: {exc}")
    umin = float(u_new.min())
    if umin < 0.0:
        umax = float(np.abs(u_new).max())
        if umin < -CG_NEGATIVE_SLACK * umax:
            return state, _failed(t_new, dt, mass_prev, POSITIVITY_FAILURE,
                                  f"u = {umin!r} < 0 after diffusion solve")
        total = float(u_new.sum())
        u_new = np.maximum(u_new, 0.0)
        u_new *= total / float(u_new.sum())
    if not np.all(np.isfinite(u_new)) or not np.all(np.isfinite(v_new)):
        return state, _failed(t_new, dt, mass_prev, BLOWUP, "non-finite values after diffusion")
    vmin = float(v_new.min())
    if not vmin > settings.floor:
        return state, _failed(t_new, dt, mass_prev, FLOOR_HIT,
                              f"min v = {vmin!r} reached the floor {settings.floor!r}")
    new = State(t_new, u_new, v_new)
    rep = StepReport(
        t=t_new, dt_used=dt, mass_u=integrate(grid, u_new), mass_u_prev=mass_prev,
        mass_sink=mass_sink, mass_source=mass_source,
        phi_max=float(phi_t.max()), cfl_ratio=_cfl_ratio(grid, v, params, dt),
        iterations=su.iterations + sv.iterations,
        **diagnose(grid, params, u_new, v_new, settings.floor),
    )
    return new, rep


def _initial_report(s: Scenario, u, v, phi0) -> StepReport:
    g = s.grid
    mass = integrate(g, u)
    return StepReport(t=0.0, dt_used=0.0, mass_u=mass, mass_u_prev=mass,
                      mass_sink=s.params.sigma * integrate(g, u * v),
                      mass_source=integrate(g, phi0), phi_max=float(phi0.max()),
                      cfl_ratio=0.0, **diagnose(g, s.params, u, v, s.solver.floor))


class _Sampler:
    """Caches cell-center samples of a source; re-evaluates only if time-dependent."""

    def __init__(self, spec, grid):
        self.spec = spec
        self.x = grid.centers()
        self.shape = grid.shape
        self.static = None if spec.time_dependent else self._eval(0.0)

    def _eval(self, t):
        return np.asarray(self.spec(self.x, t), dtype=float) * np.ones(self.shape)

    def __call__(self, t):
        return self.static if self.static is not None else self._eval(t)


Hook = Callable[[State, StepReport], None]


def run(s: Scenario, hooks: Sequence[Hook] = ()) -> Trajectory:
    """Integrate the scenario to its horizon or until a failure is detected."""
    check = validate_assumption1(s)
    if not check.ok:
        raise ScenarioError("; ".join(f"{c.name} ({c.detail})" for c in check.failed()))
    g, p, cfg = s.grid, s.params, s.solver
    phi, psi = _Sampler(s.phi, g), _Sampler(s.psi, g)
    u, v = s.initial_fields()
    state = State(0.0, u, v)
    traj = Trajectory(scenario=s, initial=state, final=state)
    traj.reports.append(_initial_report(s, u, v, phi(0.0)))
    traj.snapshots.append(state)
    if not traj.reports[0].max_u <= cfg.u_blow:
        traj.reports[0].status = BLOWUP
        traj.status, traj.message = BLOWUP, f"max u = {traj.reports[0].max_u!r} > U_blow"
        return traj
    nstep = 0
    while state.t < s.horizon:
        if nstep >= cfg.max_steps:
            traj.status, traj.message = STEP_LIMIT, f"step limit {cfg.max_steps} reached"
            break
        dt = cfg.fixed_dt if cfg.fixed_dt is not None else choose_dt(g, state, p, cfg)
        if not dt >= cfg.dt_min:
            traj.status = BLOWUP
            traj.message = f"time step collapsed: {dt!r} < dt_min {cfg.dt_min!r} at t = {state.t!r}"
            break
        # absorb round-off so fixed steps land on the horizon without a sliver step
        last = s.horizon - state.t <= dt * (1.0 + 1e-9)
        if last:
            dt = s.horizon - state.t
        new, rep = step(g, state, p, phi(state.t), psi(state.t), dt, cfg)
        if last and rep.status == OK:
            new.t = rep.t = s.horizon
        nstep += 1
        if rep.status == OK and not rep.max_u <= cfg.u_blow:
            rep.status, rep.message = BLOWUP, f"max u = {rep.max_u!r} > U_blow {cfg.u_blow!r}"
        traj.reports.append(rep)
        if rep.status != OK:
            traj.status, traj.message = rep.status, rep.message
            logger.info("%s: %s at t=%.6g", s.name, rep.status, rep.t)
            break
        state = new
        for hook in hooks:
            hook(state, rep)
        if s.snapshot_every and nstep % s.snapshot_every == 0:
            traj.snapshots.append(state)
    traj.final = state
    if traj.snapshots[-1] is not state:
        traj.snapshots.append(state)
    return traj


# --------------------------------------------------------------------------
# heat-kernel lower bound for v


def _kernel(r, d, diam):
    if r <= 0.0:
        return 0.0
    return (4.0 * math.pi * r) ** (-d / 2.0) * math.exp(-(diam * diam / (4.0 * r) + r))


def kernel_integral(t: float, d: int, diam: float) -> float:
    """``int_0^t (4 pi r)^(-d/2) exp(-(diam^2/(4r) + r)) dr`` by adaptive quadrature."""
    if t <= 0.0:
        return 0.0
    peak = min(t, max(diam * diam / (2.0 * d), 1e-12))
    val, _ = spi.quad(_kernel, 0.0, t, args=(d, diam), points=[peak] if peak < t else None,
                      limit=500, epsabs=0.0, epsrel=1e-13)
    return val


def lemma2_quadrature(t: float, d: int, diam: float, mass_u0: float, lam: float) -> float:
    """``f(t) = [kernel_integral(t) * int u0]^(1/(1-lam))``; nondecreasing in t."""
    if lam >= 1.0:
        raise ValueError("the lower-bound quadrature is undefined for lambda = 1")
    if t < 0:
        raise ValueError("t must be non-negative")
    return (kernel_integral(t, d, diam) * mass_u0) ** (1.0 / (1.0 - lam))


def lemma2_tau(min_v0: float, d: int, diam: float, mass_u0: float, lam: float) -> float:
    """Crossing time of ``exp(-t) min v0`` and the quadrature ``f(t)``, by bisection."""
    if mass_u0 <= 0:
        raise ValueError("needs a positive initial mass")

    def gap(t):
        return math.exp(-t) * min_v0 - lemma2_quadrature(t, d, diam, mass_u0, lam)

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise RuntimeError("no crossing found")
    return optimize.bisect(gap, 0.0, hi, xtol=1e-13, rtol=1e-14, maxiter=400)
