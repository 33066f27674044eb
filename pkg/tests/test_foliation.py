import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horseshoe import foliation as F
from horseshoe import torus_map as T
from horseshoe.torus_map import Parameter, TorusPoint

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


def test_stable_slope_at_saddle_matches_eigenvector():
    p = Parameter(5, 0)
    lam_u, lam_s = T.jacobian(p, TorusPoint(0, 0)).eigenvalues()
    s = F.stable_slope(p, TorusPoint(0, 0), 60)
    assert s.slope == pytest.approx(0.029952698245758996, abs=1e-15)
    assert abs(s.slope - lam_s) < 1e-14
    # (1, alpha_u) with alpha_u = 1 / lambda_u = lambda_s since det = 1
    u = F.unstable_slope(p, TorusPoint(0, 0), 60)
    assert abs(u.slope - 1 / lam_u) < 1e-14


def test_adaptive_depth_converges():
    s = F.stable_slope(Parameter(5, 0), TorusPoint(0.1, 0.3), depth=None)
    assert s.est_error < 1e-12
    assert s.depth <= F.DEPTH_CAP


def test_validity_rule_uses_strips():
    # at k=100 the widened strips cover the circle, so no f_k sample is valid
    _, _, v = F.stable_slopes(Parameter(100), np.linspace(0, 1, 50), np.zeros(50), 4)
    assert not v.any()
    _, _, v = F.stable_slopes(Parameter(20000), np.array([0.0]), np.array([0.0]), 4)
    assert v[0]


@settings(max_examples=100, deadline=None)
@given(unit, unit)
def test_stable_field_invariant(x, y):
    # Df maps (alpha_s(p), 1) onto a multiple of (alpha_s(f p), 1)
    p = Parameter(100)
    a0, _, _ = F.stable_slopes(p, x, y, 30)
    q = T.apply(p, TorusPoint(x, y))
    a1, _, _ = F.stable_slopes(p, q.x, q.y, 29)
    c = float(T.slope_coefficient(p.k, x))
    assert (c * a0[0] - 1.0) / a0[0] == pytest.approx(a1[0], rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(unit, unit)
def test_reversibility_of_slopes(x, y):
    p = Parameter(200)
    rho = T.default_rho(p)
    a, ea, _ = F.stable_slopes(p, x, y, 20, rho)
    b, eb, _ = F.unstable_slopes(p, y, x, 20, rho)
    assert abs(a[0] - b[0]) <= ea[0] + eb[0] + 1e-15


def test_pushforward_slope_consistent_with_unstable():
    # (beta_u, 1) is parallel to (1, alpha_u) at the same point
    p = Parameter(100)
    rho = None
    x, y = np.array([0.1, 0.6]), np.array([0.4, 0.9])
    b, _, _ = F.pushforward_slopes(p, x, y, 30, rho)
    a, _, _ = F.unstable_slopes(p, x, y, 31, rho)
    assert np.allclose(b * a, 1.0, rtol=1e-9)


def test_leaf_trace_follows_field():
    p = Parameter(200)
    rho = T.default_rho(p)
    tr = F.leaf_trace(p, TorusPoint(0.05, 0.6), "s", 0.05, 1e-3, 12, rho)
    mid_y = 0.5 * (tr.ys[1:] + tr.ys[:-1])
    mid_x = 0.5 * (tr.xs[1:] + tr.xs[:-1])
    a, _, _ = F.stable_slopes(p, T.wrap(mid_x), T.wrap(mid_y), 12, rho)
    assert np.allclose(np.diff(tr.xs) / np.diff(tr.ys), a, atol=1e-6)
    assert tr.to_csv().startswith("x,y\n")


def test_projection_fixes_singular_circle():
    p = Parameter(200)
    rho = T.default_rho(p)
    nu = T.critical_points(p).nu_plus
    assert F.project_stable(p, TorusPoint(0.05, nu), rho=rho) == pytest.approx(0.05, abs=1e-15)


def test_integrate_leaf_reversible():
    p = Parameter(200)
    rho = T.default_rho(p)
    u1, err = F.integrate_leaf(p, "s", 0.05, 0.6, -0.3, rho=rho)
    u0, _ = F.integrate_leaf(p, "s", u1, 0.3, 0.3, rho=rho)
    assert err[0] < 1e-10
    assert u0[0] == pytest.approx(0.05, abs=1e-9)

