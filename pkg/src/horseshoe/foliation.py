"""Stable/unstable direction fields, leaf tracing and projections onto the singular circles.

Slopes are computed as finite continued fractions.  Writing a(x) for the
(1,1) Jacobian entry (2 + 2 pi k cos 2 pi x, plus rho'(x) for g_k), the stable
direction (alpha_s, 1) at p satisfies

    alpha_s(p) = 1 / (a(x_0) - alpha_s(F(p)))

along the forward orbit x_0, x_1, ... which is exactly the inverse-Jacobian
pull-back of a direction from the end of the orbit, renormalised each step.
The unstable slope uses the y-coordinates of the backward orbit.  With
``rho=None`` the fields belong to f_k; passing a :class:`RhoSpec` gives the
fields of g_k, which stay almost vertical/horizontal through the critical strips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonHyperbolicError, SingularRegionError
from .torus_map import (
    TWO_PI,
    Parameter,
    RhoSpec,
    TorusPoint,
    critical_points,
    first_coordinate_lift,
    signed_diff,
    slope_coefficient,
    wrap,
    circle_distance,
)

POLE_GUARD = 1e-12
DEPTH_CAP = 200


@dataclass(frozen=True)
class DirectionSample:
    slope: float
    depth: int
    est_error: float
    valid: bool


@dataclass(frozen=True)
class SingularCircle:
    which: str  # "s": {y = nu_+}, "u": {x = nu_+}
    level: float


@dataclass
class LeafTrace:
    xs: np.ndarray  # lifts, consecutive samples continuous
    ys: np.ndarray
    which: str
    step: float

    @property
    def points(self):
        return [TorusPoint(x, y) for x, y in zip(self.xs, self.ys)]

    def to_csv(self) -> str:
        rows = ["x,y"] + [f"{x:.17g},{y:.17g}" for x, y in zip(wrap(self.xs.copy()), wrap(self.ys.copy()))]
        return "\n".join(rows) + "\n"


def singular_circle(param: Parameter, which: str) -> SingularCircle:
    if which not in ("s", "u"):
        raise ValueError("which must be 's' or 'u'")
    return SingularCircle(which, critical_points(param).nu_plus)


def strip_halfwidth(param: Parameter, margin: float = 0.5) -> float:
    """Critical strip halfwidth plus safety margin, both in units of k^{-1/3}."""
    return (2.0 + margin) / param.cube_root


def _valid_coords(param, rho, coords, margin):
    if rho is None:
        w = strip_halfwidth(param, margin)
        ok = np.ones(coords[0].shape, dtype=bool)
        for c in coords:
            ok &= (circle_distance(c, 0.25) > w) & (circle_distance(c, -0.25) > w)
        return ok
    ok = np.ones(coords[0].shape, dtype=bool)
    for c in coords:
        for pole in rho.poles:
            ok &= circle_distance(c, pole) > POLE_GUARD
    return ok


def _continued_fraction(coefs, upto):
    alpha = np.zeros_like(coefs[0])
    for a in reversed(coefs[:upto]):
        den = a - alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = 1.0 / den
        # an infinite coefficient (pole of rho) truncates the fraction exactly
        nxt = np.where(np.isinf(a), 0.0, nxt)
        alpha = nxt
    return alpha


def _orbit_coefficients(param, rho, x, y, depth, kind):
    """Jacobian coefficients along the forward (stable) or backward (unstable) orbit."""
    k = param.k
    x = np.array(x, dtype=float, copy=True)
    y = np.array(y, dtype=float, copy=True)
    coefs, coords = [], []
    for i in range(depth):
        c = x if kind == "s" else y
        coords.append(wrap(c.copy()))
        sc = np.sin(TWO_PI * c)
        a = 2.0 + TWO_PI * k * np.cos(TWO_PI * c)
        lift = 2.0 * c + k * sc
        if rho is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                rv, rd = rho.value_and_deriv(c)
            a = a + rd
            lift = lift + rv
        coefs.append(a)
        if i == depth - 1:
            break
        with np.errstate(invalid="ignore"):
            if kind == "s":
                x, y = wrap(lift - y), x
            else:
                x, y = y, wrap(lift - x)
    return coefs, coords


def _slopes(param, x, y, depth, rho, margin, kind):
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    coefs, coords = _orbit_coefficients(param, rho, x, y, depth, kind)
    alpha = _continued_fraction(coefs, depth)
    half = _continued_fraction(coefs, max(1, depth // 2))
    est = np.abs(alpha - half)
    valid = _valid_coords(param, rho, coords, margin) & np.isfinite(alpha)
    return alpha, est, valid


def stable_slopes(param: Parameter, x, y, depth: int = 12, rho: Optional[RhoSpec] = None, margin: float = 0.5):
    """Vectorised stable slopes; returns (alpha_s, est_error, valid) arrays."""
    return _slopes(param, x, y, depth, rho, margin, "s")


def unstable_slopes(param: Parameter, x, y, depth: int = 12, rho: Optional[RhoSpec] = None, margin: float = 0.5):
    return _slopes(param, x, y, depth, rho, margin, "u")


def pushforward_slopes(param: Parameter, x, y, depth: int = 12, rho: Optional[RhoSpec] = None, margin: float = 0.5):
    """beta_u at p, normalised as (beta_u, 1): f_k pushes (1, alpha_u) from f_k^{-1}(p) forward."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    qx = y
    qy = wrap(first_coordinate_lift(param.k, y, x))
    au, est, valid = unstable_slopes(param, qx, qy, depth, rho, margin)
    return slope_coefficient(param.k, y) - au, est, valid


def _sample(fn, param, p, depth, rho, margin):
    if depth is None:
        d = 8
        while True:
            a, e, v = fn(param, p.x, p.y, d, rho, margin)
            if e[0] < 1e-12 or d >= DEPTH_CAP:
                break
            d = min(2 * d, DEPTH_CAP)
    else:
        d = depth
        a, e, v = fn(param, p.x, p.y, d, rho, margin)
    if not np.isfinite(a[0]) or abs(a[0]) > 1e300:
        raise NonHyperbolicError(f"renormalisation failed at {p}", point=p.as_tuple())
    return DirectionSample(float(a[0]), d, float(e[0]), bool(v[0]))


def stable_slope(param: Parameter, p: TorusPoint, depth: Optional[int] = 60, rho: Optional[RhoSpec] = None, margin: float = 0.5) -> DirectionSample:
    """Slope alpha_s of the most contracted forward direction (alpha_s, 1).

    ``depth=None`` doubles from 8 until the change per doubling drops below 1e-12
    (cap 200).
    """
    return _sample(stable_slopes, param, p, depth, rho, margin)


def unstable_slope(param: Parameter, p: TorusPoint, depth: Optional[int] = 60, rho: Optional[RhoSpec] = None, margin: float = 0.5) -> DirectionSample:
    return _sample(unstable_slopes, param, p, depth, rho, margin)


def pushforward_unstable_slope(param: Parameter, p: TorusPoint, depth: Optional[int] = 60, rho: Optional[RhoSpec] = None, margin: float = 0.5) -> DirectionSample:
    return _sample(pushforward_slopes, param, p, depth, rho, margin)


# ---------------------------------------------------------------------------
# leaf integration


def _rk4(fn, u0, t0, dt, n, keep=False):
    """Integrate du/dt = fn(u, t) with n fixed RK4 steps of size dt (arrays allowed)."""
    u = np.array(u0, dtype=float, copy=True)
    t = np.array(t0, dtype=float, copy=True)
    path = [u.copy()] if keep else None
    for _ in range(n):
        k1 = fn(u, t)
        k2 = fn(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = fn(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = fn(u + dt * k3, t + dt)
        u = u + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        t = t + dt
        if keep:
            path.append(u.copy())
    return (u, path) if keep else u


def _field(param, which, depth, rho, margin):
    if which == "s":
        def fn(x, y):
            a, _, _ = stable_slopes(param, x, y, depth, rho, margin)
            return a
    else:
        def fn(y, x):
            a, _, _ = unstable_slopes(param, x, y, depth, rho, margin)
            return a
    return fn


def integrate_leaf(param, which, u0, t0, delta, step=1.0 / 128, depth=12, rho=None, margin=0.5, tol=1e-10, max_halvings=6):
    """Transport the leaf coordinate u (x for stable, y for unstable) from t0 to t0 + delta.

    Steps are halved until two successive results agree within ``tol``.  Returns
    (u_final, error_estimate).  Arrays are integrated together.
    """
    fn = _field(param, which, depth, rho, margin)
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    u0, t0, delta = np.broadcast_arrays(u0, t0, delta)
    amax = float(np.max(np.abs(delta))) if delta.size else 0.0
    if amax == 0.0:
        return u0.copy(), np.zeros_like(u0)
    n = max(1, int(math.ceil(amax / step)))
    prev = _rk4(fn, u0, t0, delta / n, n)
    err = np.full_like(prev, np.inf)
    for _ in range(max_halvings):
        n *= 2
        cur = _rk4(fn, u0, t0, delta / n, n)
        err = np.abs(cur - prev)
        prev = cur
        if not np.all(np.isfinite(cur)):
            break
        if float(np.max(err)) < tol:
            break
    return prev, err


def _check_projection(param, rho, us, which, margin, strict):
    if not np.all(np.isfinite(us)):
        raise SingularRegionError(f"{which}-leaf reached a singular point")
    if rho is not None:
        for pole in rho.poles:
            if np.any(circle_distance(us, pole) <= POLE_GUARD):
                raise SingularRegionError(f"{which}-leaf passes a pole of rho")
    elif strict:
        w = strip_halfwidth(param, margin)
        if np.any((circle_distance(us, 0.25) <= w) | (circle_distance(us, -0.25) <= w)):
            raise SingularRegionError(f"{which}-leaf enters a critical strip")


def project_stable_arrays(param, x, y, depth=12, step=1.0 / 128, rho=None, margin=0.5, tol=1e-10):
    """x-coordinates (lifts, continuous from x) where stable leaves meet C_s = {y = nu_+}."""
    nu = critical_points(param).nu_plus
    delta = signed_diff(nu, y)
    return integrate_leaf(param, "s", x, y, delta, step, depth, rho, margin, tol)


def project_unstable_arrays(param, x, y, depth=12, step=1.0 / 128, rho=None, margin=0.5, tol=1e-10):
    """y-coordinates (lifts) where unstable leaves meet C_u = {x = nu_+}."""
    nu = critical_points(param).nu_plus
    delta = signed_diff(nu, x)
    return integrate_leaf(param, "u", y, x, delta, step, depth, rho, margin, tol)


def project_stable(param: Parameter, p: TorusPoint, depth: int = 12, step: float = 1.0 / 128, rho: Optional[RhoSpec] = None, margin: float = 0.5, strict: bool = False) -> float:
    """pi_s(p): the C_s coordinate of the stable leaf through p, as a lift near p.x."""
    u, _ = project_stable_arrays(param, p.x, p.y, depth, step, rho, margin)
    _check_projection(param, rho, u, "stable", margin, strict)
    return float(u[0])


def project_unstable(param: Parameter, p: TorusPoint, depth: int = 12, step: float = 1.0 / 128, rho: Optional[RhoSpec] = None, margin: float = 0.5, strict: bool = False) -> float:
    u, _ = project_unstable_arrays(param, p.x, p.y, depth, step, rho, margin)
    _check_projection(param, rho, u, "unstable", margin, strict)
    return float(u[0])


def leaf_trace(param: Parameter, p: TorusPoint, which: str, span: float, step: float = 1e-3, depth: int = 12, rho: Optional[RhoSpec] = None, margin: float = 0.5) -> LeafTrace:
    """Polyline of a leaf through p.

    ``which``: "s" follows (alpha_s, 1) in y; "u" follows (1, alpha_u) in x; "G"
    is the f_k-image of the unstable leaf through f_k^{-1}(p) and is returned as
    a graph over y.  ``span`` is the signed extent of the free coordinate.
    """
    n = max(0, int(math.ceil(abs(span) / step)))
    if which == "G":
        qx = p.y
        qy = float(wrap(first_coordinate_lift(param.k, p.y, p.x)))
        u = leaf_trace(param, TorusPoint(qx, qy), "u", span, step, depth, rho, margin)
        # keep the image continuous through p: first coordinate lift anchored at p.x
        X = first_coordinate_lift(param.k, u.xs, u.ys)
        X = X - np.round(X[0] - p.x)
        Y = p.y + (u.xs - u.xs[0])
        return LeafTrace(X, Y, "G", step)
    if which not in ("s", "u"):
        raise ValueError("which must be 's', 'u' or 'G'")
    if n == 0:
        return LeafTrace(np.array([p.x]), np.array([p.y]), which, step)
    dt = span / n
    fn = _field(param, which, depth, rho, margin)
    if which == "s":
        _, path = _rk4(fn, np.array([p.x]), np.array([p.y]), dt, n, keep=True)
        xs = np.array([q[0] for q in path])
        ys = p.y + dt * np.arange(n + 1)
    else:
        _, path = _rk4(fn, np.array([p.y]), np.array([p.x]), dt, n, keep=True)
        ys = np.array([q[0] for q in path])
        xs = p.x + dt * np.arange(n + 1)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise SingularRegionError(f"{which}-leaf trace hit a singular point")
    return LeafTrace(xs, ys, which, abs(dt))
