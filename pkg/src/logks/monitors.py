"""Post-hoc checks of the proven bounds against a computed trajectory.

Every monitor returns a :class:`MonitorReport` made of one or more
:class:`Check` objects.  A check holds a signed margin per checkpoint
(bound minus observed, so negative means violated) and fails iff its worst
margin is below ``-tolerance``; barrier checks are strict and also fail on a
zero margin.  Monitors never modify the trajectory.

Tolerances follow ``tol = c_h2 * h^2 + c_dt * dt`` (times a bound scale) for
bounds that hold for the PDE but only approximately for the scheme.  Bounds
that the scheme satisfies by construction use fixed tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import sources
from .grid import integrate
from .model import (Certificate, Scenario, chi_threshold, prop1_epsilon,
                    source_infimum)
from .stepper import Trajectory, lemma2_tau

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"


@dataclass
class Check:
    name: str
    times: np.ndarray
    margins: np.ndarray
    tolerance: float
    strict: bool = False
    locations: Optional[Sequence[Tuple[float, ...]]] = None
    description: str = ""

    @property
    def worst_index(self) -> int:
        if len(self.margins) == 0:
            return -1
        m = np.where(np.isnan(self.margins), -np.inf, self.margins)
        return int(np.argmin(m))

    @property
    def worst_margin(self) -> float:
        i = self.worst_index
        return float(self.margins[i]) if i >= 0 else math.inf

    @property
    def worst_time(self) -> float:
        i = self.worst_index
        return float(self.times[i]) if i >= 0 else math.nan

    @property
    def worst_location(self) -> Tuple[float, ...]:
        i = self.worst_index
        if self.locations is None or i < 0:
            return ()
        return tuple(self.locations[i])

    @property
    def passed(self) -> bool:
        w = self.worst_margin
        if math.isnan(w):
            return False
        if self.strict:
            return w > -self.tolerance and w > 0
        return w >= -self.tolerance


@dataclass
class MonitorReport:
    name: str
    checks: List[Check] = field(default_factory=list)
    applicable: bool = True
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def status(self) -> str:
        if not self.applicable or not self.checks:
            return NOT_APPLICABLE
        return PASS if all(c.passed for c in self.checks) else FAIL

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> List[str]:
        out = [f"[monitor] {self.name}", f"  status: {self.status}"]
        for key, val in self.metadata.items():
            out.append(f"  {key}: {val}")
        for c in self.checks:
            loc = ", ".join(f"{x:.6g}" for x in c.worst_location)
            out.append(f"  check {c.name}: {'pass' if c.passed else 'FAIL'}")
            if c.description:
                out.append(f"    bound: {c.description}")
            out.append(f"    worst margin: {c.worst_margin:.6e} at t = {c.worst_time:.6g}"
                       + (f", x = ({loc})" if loc else ""))
            out.append(f"    tolerance: {c.tolerance:.3e}{' (strict)' if c.strict else ''}")
        return out


def _meta(traj: Trajectory) -> dict:
    dts = traj.series("dt_used")[1:]
    return {"h": max(traj.scenario.grid.spacing),
            "dt_max_used": float(dts.max()) if dts.size else 0.0,
            "steps": traj.steps, "run_status": traj.status}


def _ok_reports(traj: Trajectory):
    # the initial report describes the given data, so it is kept even when the run
    # was rejected at t = 0
    return traj.reports[:1] + [r for r in traj.reports[1:] if r.status == "ok"]


def mass_ledger_monitor(traj: Trajectory) -> MonitorReport:
    """Per-step discrete mass identity and the integrated L1 growth bound."""
    s = traj.scenario
    cfg = s.monitors
    reps = _ok_reports(traj)
    times = np.array([r.t for r in reps])
    res = np.array([r.ledger_residual for r in reps])
    identity = Check("discrete_identity", times, cfg.ledger_residual_tol - res, 0.0,
                     description="|d/dt int u + sigma int uv - int phi| / scale <= "
                                 f"{cfg.ledger_residual_tol:g}")
    mass0 = reps[0].mass_u
    phi_sup = np.maximum.accumulate(np.array([r.phi_max for r in reps]))
    bound = mass0 + s.grid.volume * phi_sup * times
    mass = np.array([r.mass_u for r in reps])
    scale = max(1.0, float(np.max(bound)))
    integrated = Check("l1_bound", times, bound - mass, cfg.l1_bound_tol * scale,
                       description="int u(t) <= int u0 + |Omega| sup|phi| t")
    meta = _meta(traj)
    meta["max_ledger_residual"] = float(res.max()) if res.size else 0.0
    return MonitorReport("mass_ledger", [identity, integrated], metadata=meta)


def v_lower_bound_monitor(traj: Trajectory, scenario: Optional[Scenario] = None) -> MonitorReport:
    """``min v(t) >= exp(-t) min v0``, plus the uniform bounds when they apply."""
    s = scenario or traj.scenario
    cfg = s.monitors
    reps = _ok_reports(traj)
    times = np.array([r.t for r in reps])
    min_v = np.array([r.min_v for r in reps])
    locs = [r.min_v_loc for r in reps]
    v0 = traj.initial.v
    min_v0 = float(v0.min())
    tol = cfg.v_lower_rel_tol * min_v0
    checks = [Check("exp_decay", times, min_v - np.exp(-times) * min_v0, tol, locations=locs,
                    description="min v(t) >= exp(-t) min v0")]
    meta = _meta(traj)
    meta["min_v0"] = min_v0
    # inf psi over the grid and time, with the same sampling as the certificates
    eta = source_infimum(s.psi, s.grid, s.horizon, max(s.horizon / 200.0, 1e-3))
    meta["inf_psi"] = eta
    if eta > 0:
        eta2 = min(min_v0, eta)
        meta["eta2"] = eta2
        checks.append(Check("uniform_eta2", times, min_v - eta2, cfg.v_lower_rel_tol * eta2,
                            locations=locs, description="min v(t) >= min{min v0, inf psi}"))
    mass0 = integrate(s.grid, traj.initial.u)
    if s.params.sigma == 0 and s.params.lam < 1 and mass0 > 0:
        tau = lemma2_tau(min_v0, s.grid.dimension, s.grid.diameter, mass0, s.params.lam)
        level = math.exp(-tau) * min_v0
        meta["tau"] = tau
        meta["eta1"] = level
        checks.append(Check("uniform_tau", times, min_v - level, cfg.v_lower_rel_tol * level,
                            locations=locs, description="min v(t) >= exp(-tau) min v0"))
    return MonitorReport("v_lower_bound", checks, metadata=meta)


def _psi_spatially_constant(s: Scenario) -> bool:
    return s.psi.spatially_constant


def _phi_zero(s: Scenario) -> bool:
    return isinstance(s.phi, sources.Constant) and s.phi.value == 0.0


def _discretization_tol(s: Scenario, traj: Trajectory, scale: float) -> float:
    cfg = s.monitors
    h = max(s.grid.spacing)
    dts = traj.series("dt_used")[1:]
    dt = float(dts.max()) if dts.size else 0.0
    return scale * (cfg.z_tol_h2 * h * h + cfg.z_tol_dt * dt)


def z_bound_monitor(traj: Trajectory, scenario: Optional[Scenario] = None) -> MonitorReport:
    """Growth and boundedness statements for z in the three parameter regimes."""
    s = scenario or traj.scenario
    p, d, cfg = s.params, s.grid.dimension, s.monitors
    meta = _meta(traj)
    if p.lam >= 1.0:
        return MonitorReport("z_bound", applicable=False,
                             metadata={**meta, "reason": "lambda = 1"})
    thr = chi_threshold(d, p.lam)
    meta["chi_threshold"] = thr
    if p.chi > thr:
        return MonitorReport("z_bound", applicable=False,
                             metadata={**meta, "reason": "chi above threshold"})
    reps = _ok_reports(traj)
    times = np.array([r.t for r in reps])
    zmax = np.array([r.max_z for r in reps])
    locs = [r.max_z_loc for r in reps]
    z0 = float(zmax[0])
    checks = []
    cases = ["i"]

    amp = max(z0, 1.0) * cfg.z_growth_slack
    meta["growth_amplitude"] = amp
    with np.errstate(divide="ignore"):
        growth = np.log(np.maximum(zmax, 0.0)) - 2.0 * times
    checks.append(Check("case_i_growth", times, math.log(amp) - growth, 0.0, locations=locs,
                        description="log max z(t) - 2t <= log(max(||z0||, 1) * slack)"))
    if p.chi < thr:
        if _phi_zero(s) and _psi_spatially_constant(s):
            cases.append("iii")
            eps = prop1_epsilon(p, d)
            bound = max(z0, (1.0 - p.lam) / eps)
            meta["epsilon"] = eps
            meta["case_iii_bound"] = bound
            checks.append(Check("case_iii_bound", times, bound - zmax,
                                _discretization_tol(s, traj, bound), locations=locs,
                                description="max z(t) <= max{||z0||, (1-lambda)/eps}"))
        if p.sigma > 0 and _inf_mass_psi(s) > 0:
            cases.append("ii")
            half = times >= 0.5 * times[-1]
            first = float(zmax[~half].max()) if np.any(~half) else z0
            cap = first * cfg.plateau_factor
            meta["plateau_cap"] = cap
            checks.append(Check("case_ii_plateau", times[half], cap - zmax[half], 0.0,
                                locations=[l for l, k in zip(locs, half) if k],
                                description="sup over last half <= sup over first half * "
                                            f"{cfg.plateau_factor:g}"))
    meta["cases"] = ",".join(cases)
    return MonitorReport("z_bound", checks, metadata=meta)


def _inf_mass_psi(s: Scenario) -> float:
    """``inf_t int psi`` over the time samples used by the certificates."""
    step = max(s.horizon / 200.0, 1e-3)
    x = s.grid.centers()
    vals = [integrate(s.grid, sources.evaluate_at(s.psi, x, t))
            for t in sources.time_samples(s.psi, s.horizon, step)]
    return min(vals)


def theorem2_barrier_monitor(traj: Trajectory, cert: Certificate) -> MonitorReport:
    """``max z(t) < delta`` (or ``delta0``) at every step of a certified run."""
    if cert is None or not cert.applies:
        reason = "no small-data certificate applies"
        return MonitorReport("barrier", applicable=False, metadata={"reason": reason})
    reps = _ok_reports(traj)
    times = np.array([r.t for r in reps])
    zmax = np.array([r.max_z for r in reps])
    level = cert.barrier
    meta = _meta(traj)
    meta["theorem"] = cert.theorem
    meta["level"] = level
    check = Check("z_below_level", times, level - zmax, 0.0, strict=True,
                  locations=[r.max_z_loc for r in reps],
                  description=f"max z(t) < {'delta' if cert.theorem == 'theorem2' else 'delta0'}")
    return MonitorReport("barrier", [check], metadata=meta)


def asymptotics_monitor(traj: Trajectory, scenario: Optional[Scenario],
                        v_inf: np.ndarray) -> MonitorReport:
    """Terminal convergence to ``(0, v_inf)`` and the exponential decay of ``int u``."""
    s = scenario or traj.scenario
    cfg = s.monitors
    meta = _meta(traj)
    if s.params.sigma <= 0:
        return MonitorReport("asymptotics", applicable=False,
                             metadata={**meta, "reason": "sigma = 0"})
    reps = _ok_reports(traj)
    times = np.array([r.t for r in reps])
    T = float(times[-1])
    u_T, v_T = traj.final.u, traj.final.v
    g = s.grid
    iu = int(np.argmax(u_T))
    dv = np.abs(v_T - v_inf)
    iv = int(np.argmax(dv))
    checks = [
        Check("u_terminal", np.array([T]), np.array([cfg.asymptotics_eps_u - float(u_T.max())]),
              0.0, locations=[g.location(iu)], description=f"||u(T)|| <= {cfg.asymptotics_eps_u:g}"),
        Check("v_terminal", np.array([T]), np.array([cfg.asymptotics_eps_v - float(dv.max())]),
              0.0, locations=[g.location(iv)],
              description=f"||v(T) - v_inf|| <= {cfg.asymptotics_eps_v:g}"),
    ]
    meta["u_T"] = float(u_T.max())
    meta["v_T_error"] = float(dv.max())

    t0 = cfg.transient_fraction * T
    window = times >= t0
    mass = np.array([r.mass_u for r in reps])
    src = np.array([r.mass_source for r in reps])
    min_v = np.array([r.min_v for r in reps])
    eta0 = float(min_v[window].min())
    rate = eta0 * s.params.sigma
    meta["eta0"] = eta0
    meta["t0"] = t0
    i0 = int(np.argmax(window))
    tw, mw = times[window], mass[window]
    # accumulated source over [t0, t] with the same left-endpoint values the scheme used
    dts = np.diff(times)
    cum_src = np.concatenate([[0.0], np.cumsum(src[:-1] * dts)])
    tail = cum_src[window] - cum_src[i0]
    envelope = np.exp(-rate * (tw - tw[0])) * mw[0] + tail
    scale = np.maximum(envelope, 1e-300)
    checks.append(Check("gronwall_envelope", tw, (envelope - mw) / scale, cfg.gronwall_rel_tol,
                        description="int u(t) <= exp(-eta0 sigma (t-t0)) int u(t0) + tail"))
    positive = mw > 0
    if np.count_nonzero(positive) >= 2 and tail[-1] == 0.0:
        slope = -np.polyfit(tw[positive], np.log(mw[positive]), 1)[0]
        meta["observed_rate"] = float(slope)
        meta["gronwall_rate"] = rate
        rel = slope / rate - 1.0 if rate > 0 else math.inf
        checks.append(Check("gronwall_rate", np.array([T]),
                            np.array([cfg.gronwall_rel_tol - abs(rel)]), 0.0,
                            description="observed decay rate within "
                                        f"{cfg.gronwall_rel_tol:.0%} of eta0 sigma"))
    return MonitorReport("asymptotics", checks, metadata=meta)


def v_infinity(scenario: Scenario, tol: float = 1e-12) -> np.ndarray:
    """Discrete solution of ``w - Delta w = psi_inf``."""
    from .elliptic import solve_helmholtz_neumann

    spec = scenario.psi_inf if scenario.psi_inf is not None else scenario.psi.limit()
    rhs = sources.sample(spec, scenario.grid)
    w, _ = solve_helmholtz_neumann(scenario.grid, rhs, tol)
    return w


def run_monitors(traj: Trajectory, names: Optional[Sequence[str]] = None,
                 certificate: Optional[Certificate] = None) -> List[MonitorReport]:
    s = traj.scenario
    names = list(names if names is not None else s.monitors.attach)
    out = []
    for name in names:
        if name == "mass_ledger":
            out.append(mass_ledger_monitor(traj))
        elif name == "v_lower_bound":
            out.append(v_lower_bound_monitor(traj))
        elif name == "z_bound":
            out.append(z_bound_monitor(traj))
        elif name == "barrier":
            out.append(theorem2_barrier_monitor(traj, certificate))
        elif name == "asymptotics":
            out.append(asymptotics_monitor(traj, s, v_infinity(s)))
        else:
            raise ValueError(f"unknown monitor {name!r}")
    return out
