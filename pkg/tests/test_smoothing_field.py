"""Smoothed squared distance: closed-form corner oracle, derivatives, symmetry, convexity."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ndtr

from geobouquet import Polytope
from geobouquet.smoothing import (AnalyticField, SmoothField, dykstra, project_brute,
                                  project_to_polytope)
from geobouquet.smoothing.projection import ActiveSetProjector

SIGMA = 0.05


def _G(u):
    """E[max(u + Z, 0)^2], the smoothed squared distance to a half-line."""
    return (1 + u * u) * ndtr(u) + u * np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)


def _dG(u):
    return 2 * (u * ndtr(u) + np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi))


def corner_oracle(X, s):
    """Near the origin corner of the unit box, d^2 = sum min(x_k, 0)^2 (separable)."""
    n = X.shape[1] - 1
    base = X[:, :n]
    val = s * s + X[:, n] ** 2 + s * s * np.sum(_G(-base / s), axis=1)
    grad = np.column_stack([-s * _dG(-base / s), 2 * X[:, n]])
    hess = np.zeros((len(X), n + 1, n + 1))
    for k in range(n):
        hess[:, k, k] = 2 * ndtr(-base[:, k] / s)
    hess[:, n, n] = 2.0
    return val, grad, hess


def _corner_points(rng, n, count):
    # stay 12 sigma away from the far faces so that the corner formula is exact
    return rng.uniform(-0.3, 0.4, (count, n + 1))


def test_half_line_profile_matches_direct_quadrature():
    for u in (-3.0, -0.4, 0.0, 1.7):
        direct, _ = quad(lambda z: max(u + z, 0.0) ** 2 * math.exp(-0.5 * z * z), -40, 40,
                         points=[-u], epsabs=1e-14)
        assert _G(u) == pytest.approx(direct / math.sqrt(2 * math.pi), abs=1e-12)


# -- projection --------------------------------------------------------------------

def test_projection_of_inside_point(unit_square):
    p = np.array([0.3, 0.6, 0.0])
    assert np.allclose(project_to_polytope(unit_square, p), p, atol=1e-12)


def test_projection_onto_face(unit_square):
    assert np.allclose(project_to_polytope(unit_square, [2.0, 0.5, 0.0]), [1.0, 0.5, 0.0],
                       atol=1e-10)


def test_projection_onto_vertex(unit_square):
    out = project_to_polytope(unit_square, [2.0, 2.0, 1.0])
    assert np.allclose(out, [1.0, 1.0, 0.0], atol=1e-10)
    # oracle: closest among the four corners and the four edge segments, by hand
    cands = [np.array(c, float) for c in ([0, 0], [0, 1], [1, 0], [1, 1])]
    for t in np.linspace(0, 1, 1001):
        cands += [np.array([t, 0.0]), np.array([t, 1.0]), np.array([0.0, t]), np.array([1.0, t])]
    best = min(cands, key=lambda c: np.linalg.norm(c - [2.0, 2.0]))
    assert np.allclose(out[:2], best, atol=1e-12)


@given(st.integers(2, 4), st.integers(0, 2**31))
def test_projection_routes_agree(n, seed):
    r = np.random.default_rng(seed)
    m = int(r.integers(n + 1, 2 * n + 4))
    N = r.standard_normal((m, n))
    N = np.vstack([N / np.linalg.norm(N, axis=1, keepdims=True), np.eye(n), -np.eye(n)])
    P = Polytope(N, np.concatenate([r.uniform(0.5, 1.5, m), np.full(2 * n, 2.0)]))
    pts = 3 * r.standard_normal((20, n))
    a = dykstra(P, pts)
    b = project_brute(P, pts)
    c, _ = ActiveSetProjector(P)(pts)
    assert np.max(np.abs(a - b)) < 1e-9
    assert np.max(np.abs(c - b)) < 1e-9


# -- field values against the corner oracle --------------------------------------------

def test_deep_interior_value_is_gaussian_moment(unit_square):
    F = SmoothField(unit_square, SIGMA)
    for h in (0.0, 0.3, -1.1):
        direct, _ = quad(lambda z: (h - SIGMA * z) ** 2 * math.exp(-0.5 * z * z), -40, 40)
        ev = F.evaluate([0.5, 0.5, h])
        assert ev.value == pytest.approx(direct / math.sqrt(2 * math.pi), abs=1e-15)
        assert ev.hessian[2, 2] == 2.0


def test_polygon_scheme_matches_corner_oracle(unit_square, rng):
    X = _corner_points(rng, 2, 400)
    ev = SmoothField(unit_square, SIGMA).evaluate(X, with_error=True)
    val, grad, hess = corner_oracle(X, SIGMA)
    assert np.max(np.abs(ev.value - val)) < 1e-14
    assert np.max(np.abs(ev.gradient - grad)) < 1e-12
    assert np.max(np.abs(ev.hessian - hess)) < 1e-10
    assert np.max(ev.error) < 1e-12


def test_gauss_hermite_scheme_against_corner_oracle(rng):
    cube = Polytope.box([0, 0, 0], [1, 1, 1])
    X = _corner_points(rng, 3, 2000)
    ev = SmoothField(cube, SIGMA).evaluate(X, with_error=True)
    val, _, _ = corner_oracle(X, SIGMA)
    err = np.abs(ev.value - val)
    assert err.max() < 1e-4
    # the reported error is an estimate, not a bound: it covers nearly every point
    assert np.mean(err <= ev.error) > 0.995


def test_schemes_agree_in_the_plane(unit_square, rng):
    X = rng.uniform(-0.2, 1.2, (200, 3))
    exact = SmoothField(unit_square, 0.1).evaluate(X)
    gh = SmoothField(unit_square, 0.1, scheme="gauss-hermite", nodes=40).evaluate(X)
    mc = SmoothField(unit_square, 0.1, scheme="monte-carlo", samples=400000, seed=3).evaluate(X)
    # the kink in the distance limits Gauss-Hermite to slow algebraic convergence
    assert np.max(np.abs(exact.value - gh.value)) < 5e-5
    assert np.max(np.abs(exact.value - mc.value)) < 5e-4


# -- derivatives ------------------------------------------------------------------------

def _fd_check(F, X, h=1e-4):
    ev = F.evaluate(X)
    worst_g = worst_h = 0.0
    for k in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[k] = h
        up, dn = F.evaluate(X + e), F.evaluate(X - e)
        worst_g = max(worst_g, np.max(np.abs((up.value - dn.value) / (2 * h) - ev.gradient[:, k])))
        col = (up.gradient - dn.gradient) / (2 * h)
        worst_h = max(worst_h, np.max(np.abs(col - ev.hessian[:, :, k])))
    return worst_g, worst_h


def test_square_derivatives_match_finite_differences(unit_square, rng):
    X = rng.uniform(-0.5, 1.5, (50, 3))
    g, H = _fd_check(SmoothField(unit_square, SIGMA), X)
    assert g < 1e-6 and H < 1e-6


def test_gauss_hermite_derivatives_match_finite_differences(rng):
    cube = Polytope.box([0, 0, 0], [1, 1, 1])
    X = rng.uniform(-0.3, 1.3, (50, 4))
    g, H = _fd_check(SmoothField(cube, 0.1), X)
    assert g < 1e-6 and H < 1e-6


def test_hessian_tends_to_twice_identity_in_a_vertex_cone(unit_square):
    x = np.array([-0.5, -0.5, 0.3])
    dev = [np.max(np.abs(SmoothField(unit_square, s).hessian(x) - 2 * np.eye(3)))
           for s in (0.2, 0.1, 0.05)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 1e-12


def test_sheets_are_symmetric(unit_square, rng):
    F = SmoothField(unit_square, SIGMA)
    X = rng.uniform(-0.5, 1.5, (100, 3))
    Y = X * [1, 1, -1]
    assert np.array_equal(F.evaluate(X).value, F.evaluate(Y).value)
    cube = SmoothField(Polytope.box([0, 0, 0], [1, 1, 1]), SIGMA)
    Z = rng.uniform(-0.5, 1.5, (50, 4))
    assert np.array_equal(cube.evaluate(Z).value, cube.evaluate(Z * [1, 1, 1, -1]).value)


def test_evaluation_is_deterministic(unit_square, rng):
    X = rng.uniform(-0.5, 1.5, (20, 3))
    for scheme in ("polygon", "gauss-hermite", "monte-carlo"):
        F = SmoothField(unit_square, SIGMA, scheme=scheme, samples=20000)
        a, b = F.evaluate(X), F.evaluate(X)
        assert np.array_equal(a.value, b.value) and np.array_equal(a.hessian, b.hessian)


def test_secant_convexity(unit_square, rng):
    F = SmoothField(unit_square, SIGMA)
    A = rng.uniform(-1, 2, (500, 3))
    B = rng.uniform(-1, 2, (500, 3))
    lam = rng.uniform(0, 1, 500)[:, None]
    mid = F.evaluate(lam * A + (1 - lam) * B, with_error=True)
    ea, eb = F.evaluate(A, with_error=True), F.evaluate(B, with_error=True)
    rhs = lam[:, 0] * ea.value + (1 - lam[:, 0]) * eb.value
    slack = mid.error + ea.error + eb.error + 1e-15
    assert np.all(mid.value <= rhs + slack)


@given(st.floats(-0.4, 1.4), st.floats(-0.4, 1.4), st.floats(-1, 1))
def test_hessian_is_positive_definite(x, y, h):
    F = SmoothField(Polytope.box([0.0, 0.0], [1.0, 1.0]), 0.2)
    lam = np.linalg.eigvalsh(F.hessian([x, y, h]))
    assert lam[0] > 0


def test_sigma_must_be_positive(unit_square):
    from geobouquet.errors import DomainError
    with pytest.raises(DomainError):
        SmoothField(unit_square, 0.0)


def test_analytic_sphere_field():
    F = AnalyticField.sphere()
    x = np.array([0.3, -0.2, 0.5])
    assert F.value(x) == pytest.approx(x @ x)
    assert np.array_equal(F.hessian(x), 2 * np.eye(3))
