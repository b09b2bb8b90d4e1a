import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logks import sources as S
from logks.grid import FloorViolation, GridSpec, grad_log_sq
from logks.model import (ModelParams, Scenario, certify, certify_theorem2, certify_theorem3,
                         chi_threshold, compute_z, dissipation_gap, prop1_epsilon,
                         validate_assumption1)

G2 = GridSpec((1.0, 1.0), (16, 16))


def make(u0=S.Constant(0.0), v0=S.Constant(1.0), phi=S.Constant(0.0), psi=S.Constant(1.0),
         chi=2.0, sigma=1.0, lam=1.0, grid=G2, horizon=1.0):
    return Scenario("t", grid, ModelParams(chi, sigma, lam), u0, v0, phi, psi, horizon)


# ---------------------------------------------------------------- threshold

def test_threshold_values():
    assert chi_threshold(2, 0.0) == 2.0
    for d in range(2, 9):
        assert chi_threshold(d, 0.0) == pytest.approx(4.0 / d, rel=0, abs=1e-15)
        assert chi_threshold(d, 1.0) == 0.0
    assert chi_threshold(1, 0.0) == 4.0


def test_threshold_nonincreasing_in_lambda_d2():
    lams = np.linspace(0.0, 1.0, 101)
    vals = np.array([chi_threshold(2, lam) for lam in lams])
    assert np.all(np.diff(vals) <= 1e-15)


@pytest.mark.parametrize("d", range(2, 9))
def test_threshold_shape_in_lambda(d):
    # derivative at lambda = 0 is 2(d-2)/d: flat for d = 2, increasing for d >= 3
    h = 1e-7
    slope = (chi_threshold(d, h) - chi_threshold(d, 0.0)) / h
    assert slope == pytest.approx(2.0 * (d - 2) / d, abs=1e-4)
    lams = np.linspace(0.0, 1.0, 101)
    vals = np.array([chi_threshold(d, lam) for lam in lams])
    peak = int(np.argmax(vals))
    assert np.all(np.diff(vals[peak:]) < 0.0)  # decreasing past the peak
    assert vals[-1] == 0.0 and vals[0] == pytest.approx(4.0 / d)
    # continuity: square-root behavior at lambda = 1, jumps shrink like sqrt(step)
    fine = np.array([chi_threshold(d, lam) for lam in np.linspace(0.0, 1.0, 10001)])
    assert np.abs(np.diff(fine)).max() < np.abs(np.diff(vals)).max() / 5.0


def test_threshold_rejects_bad_input():
    with pytest.raises(ValueError):
        chi_threshold(0, 0.5)
    with pytest.raises(ValueError):
        chi_threshold(2, 1.5)


def test_params_validation_and_theta():
    p = ModelParams(3.0, 1.0, 0.5)
    assert p.theta == 2.0
    for bad in [(-1, 1, 0), (1, -1, 0), (1, 1, 1.1)]:
        with pytest.raises(ValueError):
            ModelParams(*bad)


# ---------------------------------------------------------------- z

def test_z_trivial_cases():
    g = GridSpec((1.0,), (16,))
    z = compute_z(g, np.zeros(16), np.full(16, 2.0), ModelParams(1.0, 0.0, 0.0))
    assert np.all(z == 0.0)
    rng = np.random.default_rng(0)
    u, v = rng.random(16), 1.0 + rng.random(16)
    p = ModelParams(1.5, 0.0, 1.0)
    assert np.allclose(compute_z(g, u, v, p), u + 1.75 * grad_log_sq(g, v), rtol=1e-15)
    with pytest.raises(FloorViolation):
        compute_z(g, u, np.zeros(16), p)


def test_z_matches_closed_form_second_order():
    p = ModelParams(1.0, 0.0, 0.0)
    u0 = S.GaussianBump(0.0, 1.0, (0.5, 0.5), 0.2)
    errs = []
    for n in (64, 128, 256):
        g = GridSpec((1.0, 1.0), (n, n))
        v0 = S.CosineMode(1.0, 0.1, (1, 1), g.lengths)
        x = g.centers()
        v = v0(x)
        gx, gy = v0.gradient(x)
        exact = u0(x) / v + p.theta * (gx ** 2 + gy ** 2) / v ** 2
        z = compute_z(g, u0(x), v, p)
        errs.append(np.abs(z - exact)[2:-2, 2:-2].max())
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


# ---------------------------------------------------------------- assumption 1

def test_assumption1_clauses():
    assert validate_assumption1(make()).ok
    # a bump that dips to exactly 0 at one cell center
    dip = make(v0=S.GaussianBump(1.0, -1.0, (0.53125, 0.53125), 0.05))
    names = {c.name for c in validate_assumption1(dip).failed()}
    assert "min v0 > 0" in names
    neg = make(phi=S.GaussianBump(0.1, -0.5, (0.5, 0.5), 0.1))
    assert {c.name for c in validate_assumption1(neg).failed()} == {"phi >= 0"}


def test_assumption1_non_finite():
    bad = make(u0=S.Constant(math.inf))
    assert "u0 finite" in {c.name for c in validate_assumption1(bad).failed()}


# ---------------------------------------------------------------- theorem 2

def test_theorem2_delta_hand_value():
    cert = certify_theorem2(make())
    assert cert.eta == 1.0
    assert cert.delta == 0.5  # min{1/2, 1*(4+4)/(2*4)}
    assert cert.mu == 1.0


def test_theorem2_constant_vector_passes():
    cert = certify_theorem2(make(v0=S.Constant(1.5), psi=S.Constant(1.0)))
    assert cert.applies
    cert = certify_theorem2(make(v0=S.Constant(1.0), psi=S.Constant(1.0)))
    assert cert.applies  # a >= b with equality


def test_theorem2_strict_initial_condition():
    cert = certify_theorem2(make(u0=S.Constant(0.5)))
    assert cert.delta == 0.5
    assert not cert.flag("initial_z_small")
    assert cert.flag("source_small") and cert.flag("eta_ordering")


def test_theorem2_not_applicable():
    assert not certify_theorem2(make(sigma=0.0)).applicable
    assert not certify_theorem2(make(lam=0.5)).applicable


def test_theorem2_eta_ordering_fails_when_psi_exceeds_v0():
    cert = certify_theorem2(make(v0=S.Constant(0.8), psi=S.Constant(1.0)))
    assert not cert.flag("eta_ordering")
    assert not cert.applies


def test_theorem2_certificate_consistent_with_z0(load):
    s = load("thm2_smalldata")
    cert = certify_theorem2(s)
    assert cert.applies
    u0, v0 = s.initial_fields()
    assert compute_z(s.grid, u0, v0, s.params).max() < cert.delta


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0))
def test_source_flag_monotone_under_phi_scaling(factor):
    base = S.GaussianBump(0.0, 0.02, (0.5, 0.5), 0.2)
    scaled = S.GaussianBump(0.0, 0.02 * factor, (0.5, 0.5), 0.2)
    psi = S.GaussianBump(1.0, 0.01, (0.3, 0.3), 0.3)
    a = certify_theorem2(make(phi=base, psi=psi, v0=S.Constant(1.2)))
    b = certify_theorem2(make(phi=scaled, psi=psi, v0=S.Constant(1.2)))
    if a.flag("source_small"):
        assert b.flag("source_small")
    assert b.conditions["source_small"].lhs <= a.conditions["source_small"].lhs


# ---------------------------------------------------------------- theorem 3

def test_theorem3_delta0_hand_value():
    s = make(chi=4.0, sigma=4.0, lam=0.0)
    assert dissipation_gap(2, s.params) == pytest.approx(-1.0)
    cert = certify_theorem3(s)
    assert cert.delta0 == 0.5  # min{1/2, (4/2)/1}
    assert cert.mu0 == 1.0
    assert cert.flag("sigma_eta_large")
    assert cert.applies


def test_theorem3_sigma_eta_flag():
    cert = certify_theorem3(make(chi=4.0, sigma=3.9, lam=0.0))
    assert not cert.flag("sigma_eta_large")
    assert not cert.applies


def test_theorem3_not_applicable_below_threshold():
    assert not certify_theorem3(make(chi=2.0, sigma=4.0, lam=0.0)).applicable
    assert not certify_theorem3(make(chi=1.0, sigma=4.0, lam=0.0)).applicable
    assert not certify_theorem3(make(chi=4.0, sigma=0.0, lam=0.0)).applicable


def test_delta_never_exceeds_half():
    for chi in (0.5, 2.0, 10.0):
        for sigma in (0.1, 1.0, 100.0):
            assert certify_theorem2(make(chi=chi, sigma=sigma)).delta <= 0.5
            c3 = certify_theorem3(make(chi=chi + 2.0, sigma=sigma, lam=0.0))
            assert c3.delta0 <= 0.5


def test_certify_dispatch():
    assert certify(make(chi=1.0, lam=0.0, sigma=0.0))[0] == "theorem1"
    assert certify(make())[0] == "theorem2"
    assert certify(make(chi=4.0, sigma=4.0, lam=0.0))[0] == "theorem3"
    assert certify(make(chi=4.0, sigma=0.0, lam=0.0))[0] is None


# ---------------------------------------------------------------- epsilon

def test_epsilon_examples():
    assert prop1_epsilon(ModelParams(1.0, 0.0, 0.0), 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        prop1_epsilon(ModelParams(2.0, 0.0, 0.0), 2)
    with pytest.raises(ValueError):
        prop1_epsilon(ModelParams(0.0, 0.0, 1.0), 2)
    near = prop1_epsilon(ModelParams(2.0 - 1e-9, 0.0, 0.0), 2)
    assert 0.0 < near < 1e-8


@pytest.mark.parametrize("lam,chi", [(0.0, 1.0), (0.5, 1.0), (0.3, 0.1), (0.0, 0.0)])
def test_epsilon_linear_combination_bound_random_fields(lam, chi):
    p = ModelParams(chi, 0.0, lam)
    d = 2
    eps = prop1_epsilon(p, d)
    gap = dissipation_gap(d, p)
    rng = np.random.default_rng(11)
    g = GridSpec((1.0, 1.0), (8, 8))
    for _ in range(1000):
        u = rng.exponential(1.0, g.shape)
        v = np.exp(rng.normal(0.0, 0.5, g.shape))
        q = u / v ** (1 - lam)
        gl = grad_log_sq(g, v)
        z = compute_z(g, u, v, p)
        rhs = (1 - lam) * (lam + chi) * gl + gap * q
        assert np.all(eps * z <= rhs * (1 + 1e-12) + 1e-300)
