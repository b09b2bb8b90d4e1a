import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from logks import sources as S
from logks.grid import GridSpec, constant_field, divergence, integrate
from logks.model import ModelParams, Scenario, SolverSettings
from logks.stepper import (BLOWUP, OK, POSITIVITY_FAILURE, ScenarioError, State,
                           advection_flux, choose_dt, kernel_integral, lemma2_quadrature,
                           lemma2_tau, run, step)

G1 = GridSpec((1.0,), (32,))


def scenario(grid=G1, chi=1.0, sigma=1.0, lam=0.5, u0=None, v0=None, phi=S.Constant(0.0),
             psi=S.Constant(0.0), horizon=0.1, **solver):
    u0 = u0 if u0 is not None else S.CosineMode(1.0, 0.5, (1,) * grid.dimension, grid.lengths)
    v0 = v0 if v0 is not None else S.CosineMode(1.0, 0.2, (2,) * grid.dimension, grid.lengths)
    return Scenario("t", grid, ModelParams(chi, sigma, lam), u0, v0, phi, psi, horizon,
                    SolverSettings(**solver))


# ---------------------------------------------------------------- flux

def test_flux_vanishes_for_constant_v():
    u = np.random.default_rng(0).random(32)
    (f,) = advection_flux(G1, u, constant_field(G1, 2.0), 3.0)
    assert np.all(f == 0.0)


def test_flux_constant_u_exponential_v():
    (x,) = G1.centers()
    a, chi, u = 1.7, 0.8, 2.5
    (f,) = advection_flux(G1, np.full(32, u), np.exp(a * x), chi)
    assert np.allclose(f[1:-1], chi * u * a, rtol=1e-12)
    assert f[0] == 0.0 and f[-1] == 0.0


def test_flux_upwinding_picks_donor_cell():
    u = np.arange(1.0, 9.0)
    g = GridSpec((1.0,), (8,))
    (x,) = g.centers()
    (fpos,) = advection_flux(g, u, np.exp(x), 1.0)  # drift to the right: donor is left cell
    assert np.allclose(fpos[1:-1], u[:-1] * 1.0)
    (fneg,) = advection_flux(g, u, np.exp(-x), 1.0)
    assert np.allclose(fneg[1:-1], -u[1:])


def test_flux_divergence_integrates_to_zero_2d():
    g = GridSpec((1.0, 2.0), (12, 10))
    rng = np.random.default_rng(1)
    u, v = rng.random(g.shape), 0.5 + rng.random(g.shape)
    div = divergence(g, advection_flux(g, u, v, 2.0))
    assert abs(integrate(g, div)) <= 1e-12 * np.abs(div).sum() * g.cell_volume


# ---------------------------------------------------------------- step / run

def test_heat_mode_decay():
    s = scenario(chi=0.0, sigma=0.0, lam=1.0, grid=GridSpec((1.0,), (128,)),
                 u0=S.CosineMode(1.0, 0.5, (1,), (1.0,)), v0=S.Constant(1.0), fixed_dt=1e-4)
    traj = run(s)
    (x,) = s.grid.centers()
    mode = np.cos(math.pi * x)
    amp = np.dot(traj.final.u - traj.final.u.mean(), mode) / np.dot(mode, mode)
    assert amp / 0.5 == pytest.approx(math.exp(-math.pi ** 2 * 0.1), rel=0.02)


def test_zero_u_stays_zero():
    s = scenario(u0=S.Constant(0.0), psi=S.Constant(0.3), horizon=0.5)
    traj = run(s)
    assert traj.status == OK
    assert np.all(traj.final.u == 0.0)
    # v alone: each step is the implicit solve of ((1+dt) - dt Lap) v = v_old + dt psi
    assert traj.final.v.min() > 0.3 * (1 - math.exp(-0.5))


def test_spatially_constant_matches_ode_oracle():
    a, b, sigma, lam = 0.8, 0.5, 1.0, 0.5

    def rhs(t, y):
        u, v = y
        return [-sigma * u * v, -v + u * v ** lam]

    ref = solve_ivp(rhs, (0.0, 1.0), [a, b], rtol=1e-13, atol=1e-15).y[:, -1]
    s = scenario(grid=GridSpec((1.0,), (4,)), sigma=sigma, lam=lam, u0=S.Constant(a),
                 v0=S.Constant(b), horizon=1.0, fixed_dt=1e-4)
    traj = run(s)
    assert traj.final.u == pytest.approx(np.full(4, ref[0]), rel=1e-4)
    assert traj.final.v == pytest.approx(np.full(4, ref[1]), rel=1e-4)


def test_zero_horizon_returns_initial_state():
    traj = run(scenario(horizon=0.0))
    assert traj.steps == 0 and traj.status == OK
    assert traj.final is traj.initial


def test_rigged_huge_dt_terminates_cleanly():
    traj = run(scenario(dt_min=1e6, dt_max=1e6, horizon=1e7))
    assert traj.status in (BLOWUP, POSITIVITY_FAILURE)
    assert not traj.complete
    traj = run(scenario(fixed_dt=50.0, horizon=100.0, chi=5.0, sigma=10.0))
    assert traj.status in (BLOWUP, POSITIVITY_FAILURE)
    assert traj.final.t == 0.0


def test_u_blow_zero_is_immediate_blowup():
    traj = run(scenario(u_blow=0.0))
    assert traj.status == BLOWUP and traj.steps == 0


def test_assumption_violation_raises():
    with pytest.raises(ScenarioError):
        run(scenario(phi=S.Constant(-1.0)))


def test_run_time_stamps_and_snapshots():
    s = dataclasses.replace(scenario(horizon=0.05, dt_max=0.004), snapshot_every=3)
    traj = run(s)
    t = traj.times
    assert np.all(np.diff(t) > 0) and t[-1] == 0.05
    expected = [0.0] + [t[k] for k in range(3, traj.steps + 1, 3)]
    if expected[-1] != t[-1]:
        expected.append(t[-1])
    assert [snap.t for snap in traj.snapshots] == expected
    assert traj.snapshots[-1].t == 0.05


def test_step_is_deterministic_and_conservative():
    s = scenario(grid=GridSpec((1.0, 1.0), (16, 16)), sigma=0.0)
    u, v = s.initial_fields()
    zero = np.zeros_like(u)
    st = State(0.0, u, v)
    a, ra = step(s.grid, st, s.params, zero, zero, 1e-3)
    b, rb = step(s.grid, st, s.params, zero, zero, 1e-3)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    assert ra.mass_u == pytest.approx(integrate(s.grid, u), rel=1e-13)
    assert ra.ledger_residual <= 1e-12


# ---------------------------------------------------------------- dt

def test_dt_constant_v_uses_reaction_bound():
    s = scenario(dt_max=1.0)
    st = State(0.0, np.ones(32), np.full(32, 2.0))
    assert choose_dt(G1, st, s.params, s.solver) == pytest.approx(0.5 / (2 * 1.0 * 2.0))
    s0 = scenario(sigma=0.0, dt_max=0.3)
    assert choose_dt(G1, st, s0.params, s0.solver) == 0.3


def test_dt_halves_when_chi_doubles():
    (x,) = G1.centers()
    st = State(0.0, np.ones(32), np.exp(3.0 * x))
    p1, p2 = ModelParams(1.0, 0.0, 0.0), ModelParams(2.0, 0.0, 0.0)
    cfg = SolverSettings(dt_max=1.0)
    assert choose_dt(G1, st, p1, cfg) == pytest.approx(2.0 * choose_dt(G1, st, p2, cfg), rel=1e-14)


def test_dt_scales_with_front_steepness():
    (x,) = G1.centers()
    cfg = SolverSettings(dt_max=1.0)
    p = ModelParams(1.0, 0.0, 0.0)
    dts = []
    for k in (10.0, 20.0, 40.0):
        v = np.exp(k * x)  # |grad log v| = k exactly
        dts.append(choose_dt(G1, State(0.0, np.ones(32), v), p, cfg))
    assert dts[0] / dts[1] == pytest.approx(2.0) and dts[1] / dts[2] == pytest.approx(2.0)


# ---------------------------------------------------------------- quadrature

def simpson_oracle(t, d, diam, n=20000):
    """Composite Simpson on a fine uniform grid in r (integrand is smooth, vanishes at 0)."""
    r = np.linspace(0.0, t, 2 * n + 1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = (4 * np.pi * r) ** (-d / 2) * np.exp(-(diam ** 2 / (4 * r) + r))
    f[0] = 0.0
    h = t / (2 * n)
    return h / 3 * (f[0] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum() + f[-1])


def test_quadrature_examples():
    assert lemma2_quadrature(0.0, 2, 1.0, 1.0, 0.0) == 0.0
    assert lemma2_quadrature(2.0, 2, 1.0, 1.0, 0.3) >= lemma2_quadrature(1.0, 2, 1.0, 1.0, 0.3)
    val = lemma2_quadrature(1.0, 2, math.sqrt(2.0), 1.0, 0.0)
    assert val == pytest.approx(simpson_oracle(1.0, 2, math.sqrt(2.0)), rel=1e-8)
    with pytest.raises(ValueError):
        lemma2_quadrature(1.0, 2, 1.0, 1.0, 1.0)


def test_quadrature_power():
    k = kernel_integral(1.5, 2, 1.0)
    assert lemma2_quadrature(1.5, 2, 1.0, 2.0, 0.5) == pytest.approx((2.0 * k) ** 2, rel=1e-14)


def test_tau_is_crossing_time():
    min_v0, d, diam, mass, lam = 1.0, 2, math.sqrt(2.0), 1.0, 0.0
    tau = lemma2_tau(min_v0, d, diam, mass, lam)
    ts = np.linspace(0.01, 10.0, 5000)
    gap = np.array([math.exp(-t) * min_v0 - lemma2_quadrature(t, d, diam, mass, lam) for t in ts])
    crossing = ts[np.argmax(gap <= 0)]
    assert abs(tau - crossing) <= ts[1] - ts[0]
    assert math.exp(-tau) * min_v0 == pytest.approx(lemma2_quadrature(tau, d, diam, mass, lam),
                                                    rel=1e-9)
