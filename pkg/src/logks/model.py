"""Parameters, threshold formula, the transformed variable z and theorem certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import sources
from .grid import DEFAULT_FLOOR, GridSpec, grad_log_sq
from .sources import SourceSpec

OVERSAMPLE = 4


@dataclass(frozen=True)
class ModelParams:
    chi: float
    sigma: float
    lam: float

    def __post_init__(self):
        if not self.chi >= 0:
            raise ValueError(f"chi must be >= 0, got {self.chi}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def theta(self) -> float:
        return self.lam + self.chi / 2.0


@dataclass(frozen=True)
class SolverSettings:
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    safety: float = 0.5
    u_blow: float = 1e8
    floor: float = DEFAULT_FLOOR
    cg_tol: float = 1e-10
    cg_maxiter: int = 10_000
    preconditioner: bool = False
    max_steps: int = 10_000_000
    fixed_dt: Optional[float] = None


@dataclass(frozen=True)
class MonitorSettings:
    attach: Tuple[str, ...] = ("mass_ledger", "v_lower_bound", "z_bound", "barrier")
    ledger_residual_tol: float = 1e-10
    l1_bound_tol: float = 1e-8
    v_lower_rel_tol: float = 1e-3
    z_growth_slack: float = 10.0
    plateau_factor: float = 1.05
    z_tol_h2: float = 10.0
    z_tol_dt: float = 10.0
    asymptotics_eps_u: float = 1e-3
    asymptotics_eps_v: float = 1e-4
    transient_fraction: float = 0.25
    gronwall_rel_tol: float = 0.05


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: GridSpec
    params: ModelParams
    u0: SourceSpec
    v0: SourceSpec
    phi: SourceSpec
    psi: SourceSpec
    horizon: float
    solver: SolverSettings = field(default_factory=SolverSettings)
    monitors: MonitorSettings = field(default_factory=MonitorSettings)
    psi_inf: Optional[SourceSpec] = None
    snapshot_every: int = 0

    def initial_fields(self) -> Tuple[np.ndarray, np.ndarray]:
        return sources.sample(self.u0, self.grid), sources.sample(self.v0, self.grid)


def chi_threshold(d: int, lam: float) -> float:
    """Largest chemotactic sensitivity covered by the large-data result."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    a = 1.0 - lam
    return (2.0 / d) * (a + math.sqrt(2.0 * d * lam * a + a * a))


def dissipation_gap(d: int, params: ModelParams) -> float:
    """``(1 - lam) - d chi^2 / (8 lam + 4 chi)``; positive iff chi is below threshold."""
    denom = 8.0 * params.lam + 4.0 * params.chi
    if denom == 0.0:
        return 1.0 - params.lam
    return (1.0 - params.lam) - d * params.chi ** 2 / denom


def prop1_epsilon(params: ModelParams, d: int) -> float:
    """Coefficient-wise constant with ``eps z`` below the damping terms.

    ``eps * (q + theta g) <= (1-lam)(lam+chi) g + gap * q`` for all
    ``q = u/v^(1-lam) >= 0`` and ``g = |grad log v|^2 >= 0``.
    """
    if params.lam >= 1.0:
        raise ValueError("epsilon is defined for lambda < 1 only")
    if not params.chi < chi_threshold(d, params.lam):
        raise ValueError("epsilon needs chi strictly below the threshold")
    gap = dissipation_gap(d, params)
    theta = params.theta
    grad_coeff = (1.0 - params.lam) * (params.lam + params.chi)
    if theta == 0.0:
        return gap
    return min(gap, grad_coeff / theta)


def compute_z(grid: GridSpec, u: np.ndarray, v: np.ndarray, params: ModelParams,
              floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """``u / v^(1-lam) + theta |grad log v|^2`` cellwise."""
    g = grad_log_sq(grid, v, floor)
    return u / v ** (1.0 - params.lam) + params.theta * g


# --------------------------------------------------------------------------
# Assumption 1


@dataclass
class Clause:
    name: str
    holds: bool
    detail: str = ""


@dataclass
class ValidationReport:
    clauses: List[Clause]

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.clauses)

    def failed(self) -> List[Clause]:
        return [c for c in self.clauses if not c.holds]


def validate_assumption1(s: Scenario) -> ValidationReport:
    clauses = []
    grid = s.grid
    ts = sorted(set(sources.time_samples(s.phi, s.horizon, _time_step(s))
                    + sources.time_samples(s.psi, s.horizon, _time_step(s))))
    named = [("u0", s.u0, [0.0]), ("v0", s.v0, [0.0]), ("phi", s.phi, ts), ("psi", s.psi, ts)]
    x = grid.centers()
    for name, spec, times in named:
        vals = [sources.evaluate_at(spec, x, t) for t in times]
        finite = all(np.all(np.isfinite(a)) for a in vals)
        clauses.append(Clause(f"{name} finite", finite))
        lo = min(float(a.min()) for a in vals) if finite else math.nan
        clauses.append(Clause(f"{name} >= 0", finite and lo >= 0.0, f"min = {lo!r}"))
    v0 = sources.sample(s.v0, grid)
    clauses.append(Clause("min v0 > 0", float(v0.min()) > 0.0, f"min v0 = {float(v0.min())!r}"))
    # cell-centered sampling with mirrored ghosts realizes zero normal derivatives
    clauses.append(Clause("Neumann compatibility", True, "automatic for cell-centered data"))
    return ValidationReport(clauses)


# --------------------------------------------------------------------------
# certificates


@dataclass
class Condition:
    """One hypothesis as ``lhs <op> rhs``."""

    name: str
    lhs: float
    rhs: float
    op: str
    holds: bool

    def __str__(self):
        mark = "ok  " if self.holds else "FAIL"
        return f"[{mark}] {self.name}: {self.lhs:.6g} {self.op} {self.rhs:.6g}"


@dataclass
class Certificate:
    theorem: str
    applicable: bool
    reason: str = ""
    eta: float = math.nan
    delta: float = math.nan
    mu: float = math.nan
    delta0: float = math.nan
    mu0: float = math.nan
    conditions: Dict[str, Condition] = field(default_factory=dict)
    resolution: Tuple[int, ...] = ()

    @property
    def applies(self) -> bool:
        return self.applicable and bool(self.conditions) and all(
            c.holds for c in self.conditions.values())

    @property
    def barrier(self) -> float:
        """The level z must stay below (delta or delta0)."""
        return self.delta if self.theorem == "theorem2" else self.delta0

    def flag(self, name: str) -> bool:
        return self.conditions[name].holds

    def lines(self) -> List[str]:
        out = [f"{self.theorem}: " + ("applies" if self.applies else
                                      ("not applicable: " + self.reason if not self.applicable
                                       else "hypotheses not met"))]
        if self.applicable:
            for key in ("eta", "delta", "mu", "delta0", "mu0"):
                val = getattr(self, key)
                if not math.isnan(val):
                    out.append(f"  {key} = {val:.12g}")
            out.extend("  " + str(c) for c in self.conditions.values())
            out.append(f"  sampling resolution: {self.resolution} (+{OVERSAMPLE}x oversampled)")
        return out


def _time_step(s: Scenario) -> float:
    return max(s.horizon / 200.0, 1e-3) if s.horizon > 0 else 1.0


def _sampling_grids(grid: GridSpec):
    return [grid, grid.refined(OVERSAMPLE)]


def source_infimum(spec: SourceSpec, grid: GridSpec, horizon: float, step: float) -> float:
    """``inf psi`` over grid points (plus oversampling) and time samples."""
    vals = []
    for g in _sampling_grids(grid):
        x = g.centers()
        for t in sources.time_samples(spec, horizon, step):
            vals.append(float(sources.evaluate_at(spec, x, t).min()))
    known = spec.infimum()
    if known is not None:
        vals.append(known)
    return min(vals)


def source_supremum(spec: SourceSpec, grid: GridSpec, horizon: float, step: float) -> float:
    vals = []
    for g in _sampling_grids(grid):
        x = g.centers()
        for t in sources.time_samples(spec, horizon, step):
            vals.append(float(sources.evaluate_at(spec, x, t).max()))
    known = spec.supremum()
    if known is not None:
        vals.append(known)
    return max(vals)


def _sup_over(grid: GridSpec, fn, times) -> float:
    return max(float(np.max(fn(g.centers(), t))) for g in _sampling_grids(grid) for t in times)


def _grad_sq(grads) -> np.ndarray:
    return sum(g * g for g in grads)


def _initial_z_sup(s: Scenario, theta: float, divide_by_v: bool) -> float:
    """Sup of ``u0 + theta |grad log v0|^2`` by analytic sampling, and of discrete z0."""
    lam_pow = 1.0 - s.params.lam

    def expr(x, t):
        v = s.v0(x)
        g = _grad_sq(s.v0.gradient(x)) / v ** 2
        u = s.u0(x) * np.ones_like(v)
        out = u + theta * g
        if divide_by_v:
            out = np.maximum(out, u / v ** lam_pow + theta * g)
        return out

    analytic = _sup_over(s.grid, expr, [0.0])
    u0, v0 = s.initial_fields()
    discrete = float(compute_z(s.grid, u0, v0, s.params, s.solver.floor).max())
    return max(analytic, discrete)


def _grad_sqrt_sq(spec: SourceSpec, x, t):
    """``|grad sqrt(psi)|^2 = |grad psi|^2 / (4 psi)``."""
    val = sources.evaluate_at(spec, x, t)
    g2 = _grad_sq(sources.gradient_at(spec, x, t))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(g2 == 0.0, 0.0, g2 / (4.0 * val))
    return out


def _common(s: Scenario, theorem: str) -> Tuple[Certificate, float, float, float, List[float]]:
    step = _time_step(s)
    eta = source_infimum(s.psi, s.grid, s.horizon, step)
    v0_min = min(float(sources.sample(s.v0, g).min()) for g in _sampling_grids(s.grid))
    if s.v0.infimum() is not None:
        v0_min = min(v0_min, s.v0.infimum())
    v0_sup = source_supremum(s.v0, s.grid, 0.0, step)
    psi_sup = source_supremum(s.psi, s.grid, s.horizon, step)
    cert = Certificate(theorem=theorem, applicable=True, eta=eta, resolution=s.grid.cells)
    cert.conditions["eta_ordering"] = Condition(
        "0 < eta <= min v0", eta, v0_min, "<=", 0.0 < eta <= v0_min)
    times = sorted(set(sources.time_samples(s.phi, s.horizon, step)
                       + sources.time_samples(s.psi, s.horizon, step)))
    return cert, v0_sup, psi_sup, eta, times


def certify_theorem2(s: Scenario) -> Certificate:
    """Small-data hypotheses for ``lambda = 1``."""
    p = s.params
    if p.sigma <= 0 or p.lam != 1.0:
        return Certificate("theorem2", False, reason="needs sigma > 0 and lambda = 1")
    cert, v0_sup, psi_sup, eta, times = _common(s, "theorem2")
    d = s.grid.dimension
    chi = p.chi
    if chi == 0:
        cert.delta = 0.5
    else:
        cert.delta = min(0.5, p.sigma * eta * (4.0 + 2.0 * chi) / (d * chi ** 2))
    cert.mu = max(1.0 / p.sigma, v0_sup, psi_sup)
    lhs = _initial_z_sup(s, 1.0 + chi / 2.0, divide_by_v=False)
    cert.conditions["initial_z_small"] = Condition(
        "||u0 + (1+chi/2)|grad log v0|^2|| < delta", lhs, cert.delta, "<", lhs < cert.delta)
    if eta > 0:
        def src(x, t):
            return (sources.evaluate_at(s.phi, x, t)
                    + (4.0 + 2.0 * chi) / eta * _grad_sqrt_sq(s.psi, x, t))
        lhs = _sup_over(s.grid, src, times)
        rhs = eta * cert.delta / (2.0 * cert.mu)
    else:
        lhs, rhs = math.inf, 0.0
    cert.conditions["source_small"] = Condition(
        "||phi + (4+2chi)/eta |grad sqrt psi|^2|| < eta delta / (2 mu)", lhs, rhs, "<", lhs < rhs)
    return cert


def certify_theorem3(s: Scenario) -> Certificate:
    """Small-data hypotheses for ``0 <= lambda < 1`` above the threshold."""
    p = s.params
    d = s.grid.dimension
    if p.sigma <= 0 or p.lam >= 1.0:
        return Certificate("theorem3", False, reason="needs sigma > 0 and lambda < 1")
    if not p.chi > chi_threshold(d, p.lam):
        return Certificate("theorem3", False,
                           reason="chi <= chi_threshold; the large-data result covers it")
    cert, v0_sup, psi_sup, eta, times = _common(s, "theorem3")
    excess = -dissipation_gap(d, p)
    # excess > 0 whenever chi > chi_threshold
    cert.delta0 = min(0.5, (p.sigma * eta / 2.0) / excess)
    cert.mu0 = max(2.0 / p.sigma, v0_sup, psi_sup)
    cert.conditions["sigma_eta_large"] = Condition(
        "sigma eta >= 4(1-lambda)", p.sigma * eta, 4.0 * (1.0 - p.lam), ">=",
        p.sigma * eta >= 4.0 * (1.0 - p.lam))
    lhs = _initial_z_sup(s, p.theta, divide_by_v=True)
    cert.conditions["initial_z_small"] = Condition(
        "||u0 + (lambda+chi/2)|grad log v0|^2|| < delta0", lhs, cert.delta0, "<",
        lhs < cert.delta0)
    if eta > 0:
        def src(x, t):
            return (sources.evaluate_at(s.phi, x, t) / eta ** (1.0 - p.lam)
                    + (4.0 * p.lam + 2.0 * p.chi) / eta * _grad_sqrt_sq(s.psi, x, t))
        lhs = _sup_over(s.grid, src, times)
        rhs = eta * cert.delta0 / (2.0 * cert.mu0)
    else:
        lhs, rhs = math.inf, 0.0
    cert.conditions["source_small"] = Condition(
        "||phi/eta^(1-lambda) + (4lambda+2chi)/eta |grad sqrt psi|^2|| < eta delta0 / (2 mu0)",
        lhs, rhs, "<", lhs < rhs)
    return cert


def theorem1_applies(d: int, params: ModelParams) -> bool:
    return params.lam < 1.0 and params.chi <= chi_threshold(d, params.lam)


def certify(s: Scenario) -> Tuple[Optional[str], List[Certificate]]:
    """Evaluate all global-existence results; return the first that applies."""
    d = s.grid.dimension
    certs = [certify_theorem2(s), certify_theorem3(s)]
    if theorem1_applies(d, s.params):
        return "theorem1", certs
    for c in certs:
        if c.applies:
            return c.theorem, certs
    return None, certs
