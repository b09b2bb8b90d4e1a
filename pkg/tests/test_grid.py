import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate as spi

from logks.grid import (FloorViolation, GridSpec, constant_field, divergence, face_gradient,
                        grad_log_sq, integrate, laplacian_neumann)
from logks.sources import GaussianBump, sample

GRIDS = [GridSpec((1.0,), (16,)), GridSpec((2.0, 1.0), (8, 6))]


def test_gridspec_invariants():
    g = GridSpec((2.0, 1.0), (8, 4))
    assert g.dimension == 2
    assert g.spacing == (0.25, 0.25)
    assert g.shape == (4, 8)
    assert g.volume == pytest.approx(2.0)
    assert g.diameter == pytest.approx(math.sqrt(5.0))
    with pytest.raises(ValueError):
        GridSpec((1.0,), (3,))
    with pytest.raises(ValueError):
        GridSpec((1.0, 1.0, 1.0), (4, 4, 4))
    with pytest.raises(ValueError):
        GridSpec((0.0,), (8,))


def test_row_major_x_fastest():
    g = GridSpec((2.0, 1.0), (4, 4))
    x, y = g.centers()
    assert x.shape == g.shape
    flat = x.ravel()
    assert flat[0] < flat[1]  # x varies first


@pytest.mark.parametrize("grid", GRIDS)
def test_laplacian_of_constant_is_zero(grid):
    assert np.all(laplacian_neumann(grid, constant_field(grid, 3.7)) == 0.0)


def test_laplacian_cosine_second_order():
    errors = []
    for n in (32, 64, 128):
        g = GridSpec((2.0,), (n,))
        (x,) = g.centers()
        f = np.cos(math.pi * x / 2.0)
        exact = -(math.pi / 2.0) ** 2 * f
        errors.append(np.abs(laplacian_neumann(g, f) - exact).max())
    assert errors[0] / errors[1] >= 3.5
    assert errors[1] / errors[2] >= 3.5


def test_laplacian_2d_second_order():
    errors = []
    for n in (16, 32, 64):
        g = GridSpec((1.0, 2.0), (n, 2 * n))
        x, y = g.centers()
        f = np.cos(math.pi * x) * np.cos(math.pi * y / 2.0)
        exact = -(math.pi ** 2 + (math.pi / 2) ** 2) * f
        errors.append(np.abs(laplacian_neumann(g, f) - exact).max())
    assert errors[0] / errors[1] >= 3.5 and errors[1] / errors[2] >= 3.5


fields_1d = arrays(np.float64, 16, elements=st.floats(-1e3, 1e3))
fields_2d = arrays(np.float64, (6, 8), elements=st.floats(-1e3, 1e3))


@settings(max_examples=50, deadline=None)
@given(fields_1d, fields_2d)
def test_laplacian_integrates_to_zero(f1, f2):
    for g, f in zip(GRIDS, (f1, f2)):
        scale = np.abs(f).sum() * g.cell_volume / min(g.spacing) ** 2 + 1e-300
        assert abs(integrate(g, laplacian_neumann(g, f))) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(fields_1d, fields_2d)
def test_divergence_of_gradient_is_laplacian(f1, f2):
    for g, f in zip(GRIDS, (f1, f2)):
        a = divergence(g, face_gradient(g, f))
        b = laplacian_neumann(g, f)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13 * (np.abs(b).max() + 1.0))


def test_face_gradient_examples():
    g = GridSpec((1.0,), (8,))
    assert np.all(face_gradient(g, constant_field(g, 2.0))[0] == 0.0)
    (x,) = g.centers()
    (fx,) = face_gradient(g, 3.0 * x)
    assert np.allclose(fx[1:-1], 3.0, rtol=1e-13)
    assert fx[0] == 0.0 and fx[-1] == 0.0
    g2 = GRIDS[1]
    fx, fy = face_gradient(g2, np.random.default_rng(0).random(g2.shape))
    assert fx.shape == (6, 9) and fy.shape == (7, 8)
    assert np.all(fx[:, [0, -1]] == 0.0) and np.all(fy[[0, -1], :] == 0.0)


def test_divergence_zero_and_telescoping():
    g = GRIDS[1]
    zero = (np.zeros((6, 9)), np.zeros((7, 8)))
    assert np.all(divergence(g, zero) == 0.0)
    rng = np.random.default_rng(1)
    fx, fy = rng.normal(size=(6, 9)), rng.normal(size=(7, 8))
    fx[:, [0, -1]] = 0.0
    fy[[0, -1], :] = 0.0
    total = np.abs(fx).sum() + np.abs(fy).sum()
    assert abs(integrate(g, divergence(g, (fx, fy)))) <= 1e-12 * total


def test_integrate_examples():
    assert integrate(GridSpec((1.0, 1.0), (7, 5)), np.ones((5, 7))) == pytest.approx(1.0, rel=1e-15)
    assert integrate(GridSpec((2.0,), (9,)), np.full(9, 3.0)) == pytest.approx(6.0, rel=1e-15)


def test_integrate_gaussian_against_adaptive_quadrature():
    bump = GaussianBump(0.1, 1.0, (0.4, 0.55), 0.15)
    g = GridSpec((1.0, 1.0), (256, 256))
    oracle, _ = spi.dblquad(lambda y, x: float(bump((np.array(x), np.array(y)))),
                            0.0, 1.0, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    assert integrate(g, sample(bump, g)) == pytest.approx(oracle, rel=1e-3)


def test_grad_log_sq_examples():
    g = GridSpec((1.0,), (8,))
    assert np.all(grad_log_sq(g, constant_field(g, 2.0)) == 0.0)
    errs = []
    for n in (16, 32, 64):
        g = GridSpec((1.0,), (n,))
        (x,) = g.centers()
        val = grad_log_sq(g, np.exp(1.5 * x))
        errs.append(abs(val[1:-1] - 2.25).max())
    # face gradients of log(e^{ax}) are exact, so interior cells are exact too
    assert max(errs) < 1e-12
    v = np.ones(8)
    v[3] = 1e-300
    with pytest.raises(FloorViolation):
        grad_log_sq(GridSpec((1.0,), (8,)), v)


def test_grad_log_sq_second_order_smooth():
    errs = []
    for n in (32, 64, 128):
        g = GridSpec((1.0,), (n,))
        (x,) = g.centers()
        v = 3.0 + np.cos(math.pi * x)
        exact = (math.pi * np.sin(math.pi * x) / v) ** 2
        errs.append(np.abs(grad_log_sq(g, v) - exact)[2:-2].max())
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 8), elements=st.floats(0.1, 10.0)))
def test_mirror_symmetry_commutes(f):
    g = GRIDS[1]
    for axis in (0, 1):
        flip = np.flip(f, axis=axis)
        assert np.allclose(laplacian_neumann(g, flip), np.flip(laplacian_neumann(g, f), axis=axis),
                           rtol=1e-12, atol=1e-9)
        assert np.allclose(grad_log_sq(g, flip), np.flip(grad_log_sq(g, f), axis=axis),
                           rtol=1e-12, atol=1e-12)
