"""Tangency circles sigma_+-, curvature gaps, unfolding speeds and the heteroclinic search.

Conventions.  All foliations here are those of g_k (default rho profile) and
G^u = (f_k)_* F^u.  The tangency circle is the locus where the pushed-forward
unstable slope beta_u equals the stable slope alpha_s; near y = nu_+ the
Jacobian of f_k at f_k^{-1}(p) is degenerate, which is what makes G^u leaves
turn vertical there.

A *footprint* is the point where a leaf meets the sigma_+ circle.  The stable
footprint of p_s is where F^s(p_s) meets it; unstable footprints are points
f_k(z) on the circle with z on the unstable leaf of p_u (optionally after one
forward iterate).  A heteroclinic tangency is a parameter where a footprint of
each kind coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import NoBracketError, NoSolutionError, SingularRegionError
from .foliation import (
    _rk4,
    integrate_leaf,
    leaf_trace,
    pushforward_slopes,
    stable_slopes,
    unstable_slopes,
)
from .torus_map import (
    Parameter,
    RhoSpec,
    TorusPoint,
    critical_points,
    default_rho,
    find_fixed_point,
    first_coordinate_lift,
    slope_coefficient,
    signed_diff,
    wrap,
    circle_distance,
)

ROOT_TOL = 1e-9
LEAF_STEP = 1.0 / 512


@dataclass
class TangencyCircle:
    sign: str
    k: float
    nu: float
    xs: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray
    amplitude: float
    max_slope: float
    bound_checks: dict
    failed: List[float] = field(default_factory=list)

    def to_csv(self) -> str:
        rows = ["x,sigma,residual"]
        rows += [f"{x:.17g},{y:.17g},{r:.3e}" for x, y, r in zip(self.xs, self.ys, self.residuals)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class TangencyEvent:
    k: float
    r: float
    q: TorusPoint
    curvature_gap: float
    speed_s: float
    speed_Gu: float
    residual: float
    matched: dict

    def __post_init__(self):
        window = 4.0 / abs(self.k) ** (1.0 / 3.0)
        if not abs(self.r - self.k) < window:
            raise NoSolutionError(f"r={self.r} outside |r-k| < {window}", stage="tangency")
        if not self.curvature_gap > 0:
            raise NoSolutionError("degenerate tangency (curvature gap <= 0)", stage="tangency")
        if not self.speed_Gu - self.speed_s > 0:
            raise NoSolutionError("tangency does not unfold generically", stage="tangency")


@dataclass
class TangencyCantorSets:
    Ksh: np.ndarray
    Kuh: np.ndarray
    level: int
    max_neighbour_distance: float
    neighbour_bound: float


# ---------------------------------------------------------------------------
# the tangency circles


def _tangency_function(param, x, y, depth, rho):
    b, _, _ = pushforward_slopes(param, x, y, depth, rho)
    a, _, _ = stable_slopes(param, x, y, depth, rho)
    return b - a


def sigma_values(param: Parameter, x, sign: str = "+", depth: int = 12, rho: Optional[RhoSpec] = None):
    """Solve beta_u(x, y) = alpha_s(x, y) for y near nu_sign at every x.

    Returns (y, residual, ok).  The search window starts at 4/(270 k^{5/3}) and
    doubles until a sign change is bracketed (cap 1/k); bisection then runs to
    machine resolution.
    """
    if rho is None:
        rho = default_rho(param)
    crit = critical_points(param)
    nu = crit.nu_plus if sign == "+" else crit.nu_minus
    k = abs(param.k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    w = np.full(n, 4.0 / (270.0 * k ** (5.0 / 3.0)))
    cap = 1.0 / k
    lo = nu - w
    hi = nu + w
    flo = _tangency_function(param, x, lo, depth, rho)
    fhi = _tangency_function(param, x, hi, depth, rho)
    while True:
        need = ~(flo * fhi < 0) & (w < cap)
        if not np.any(need):
            break
        w = np.where(need, np.minimum(2.0 * w, cap), w)
        lo = np.where(need, nu - w, lo)
        hi = np.where(need, nu + w, hi)
        flo = np.where(need, _tangency_function(param, x, lo, depth, rho), flo)
        fhi = np.where(need, _tangency_function(param, x, hi, depth, rho), fhi)
    ok = flo * fhi < 0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        fm = _tangency_function(param, x, mid, depth, rho)
        left = fm * flo > 0
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    y = np.where(np.abs(flo) <= np.abs(_tangency_function(param, x, hi, depth, rho)), lo, hi)
    res = np.abs(_tangency_function(param, x, y, depth, rho))
    ok &= res < ROOT_TOL
    return y, res, ok


def tangency_circle(param: Parameter, sign: str = "+", grid_n: int = 1024, depth: int = 12, rho: Optional[RhoSpec] = None, override: bool = False) -> TangencyCircle:
    param.require_large(override)
    if rho is None:
        rho = default_rho(param)
    k = abs(param.k)
    crit = critical_points(param)
    nu = crit.nu_plus if sign == "+" else crit.nu_minus
    xs = np.arange(grid_n) / grid_n
    ys, res, ok = sigma_values(param, xs, sign, depth, rho)
    if ok.mean() < 0.9:
        raise NoBracketError(f"only {ok.mean():.0%} of grid points bracketed", failed=xs[~ok].tolist())
    xs_ok, ys_ok = xs[ok], ys[ok]
    amplitude = float(np.max(np.abs(ys_ok - nu)))
    # periodic finite differences over consecutive accepted samples
    dx = np.diff(np.append(xs_ok, xs_ok[0] + 1.0))
    dy = np.diff(np.append(ys_ok, ys_ok[0]))
    max_slope = float(np.max(np.abs(dy / dx)))
    amp_bound = 1.0 / (270.0 * k ** (5.0 / 3.0))
    slope_bound = 1.0 / (12.0 * k ** (4.0 / 3.0))
    checks = {
        "amplitude_bound": amp_bound,
        "amplitude_ok": amplitude <= amp_bound,
        "slope_bound": slope_bound,
        "slope_ok": max_slope <= slope_bound,
    }
    return TangencyCircle(sign, param.k, nu, xs_ok, ys_ok, res[ok], amplitude, max_slope, checks, xs[~ok].tolist())


def scaling_exponent(ks: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(k)."""
    return float(np.polyfit(np.log(np.asarray(ks, float)), np.log(np.asarray(values, float)), 1)[0])


# ---------------------------------------------------------------------------
# curvature


def _graph_curvature(lo, mid, hi, h):
    d1 = (hi - lo) / (2.0 * h)
    d2 = (hi - 2.0 * mid + lo) / (h * h)
    return d2 / (1.0 + d1 * d1) ** 1.5


def leaf_curvatures(param: Parameter, p: TorusPoint, h: float = 1e-4, depth: int = 12, rho: Optional[RhoSpec] = None) -> Tuple[float, float]:
    """Signed curvatures of the F^s and G^u leaves through p, both as graphs x(y)."""
    if rho is None:
        rho = default_rho(param)
    up = leaf_trace(param, p, "s", h, h, depth, rho)
    dn = leaf_trace(param, p, "s", -h, h, depth, rho)
    ks = _graph_curvature(dn.xs[-1], up.xs[0], up.xs[-1], h)
    gu = leaf_trace(param, p, "G", h, h, depth, rho)
    gd = leaf_trace(param, p, "G", -h, h, depth, rho)
    kg = _graph_curvature(gd.xs[-1], gu.xs[0], gu.xs[-1], h)
    return float(ks), float(kg)


def curvature_gap(param: Parameter, point: TorusPoint, depth: int = 12, h: float = 1e-4, rho: Optional[RhoSpec] = None, swap: bool = False) -> float:
    """Curvature of the F^s leaf minus that of the G^u leaf at ``point`` (reversed if ``swap``)."""
    ks, kg = leaf_curvatures(param, point, h, depth, rho)
    return kg - ks if swap else ks - kg


def curvature_gap_with_error(param, point, depth=12, h=1e-4, rho=None):
    g1 = curvature_gap(param, point, depth, h, rho)
    g2 = curvature_gap(param, point, depth, h / 2.0, rho)
    return g2, abs(g2 - g1)


# ---------------------------------------------------------------------------
# footprints


def _sigma_scalar(param, x, depth, rho):
    y, res, ok = sigma_values(param, np.array([x]), "+", depth, rho)
    if not ok[0]:
        raise NoBracketError(f"no sigma_+ root at x={x}")
    return float(y[0])


def stable_footprint(param: Parameter, depth: int = 12, rho: Optional[RhoSpec] = None, step: float = LEAF_STEP) -> Tuple[float, float]:
    """Where the stable leaf of p_s = (0, 0) meets the sigma_+ circle; returns (x lift near 0, y)."""
    if rho is None:
        rho = default_rho(param)
    nu = critical_points(param).nu_plus
    x_nu, _ = integrate_leaf(param, "s", 0.0, 0.0, nu, step, depth, rho, max_halvings=0)
    x, y = float(x_nu[0]), nu
    for _ in range(4):
        y_new = _sigma_scalar(param, wrap(x), depth, rho)
        xs, _ = integrate_leaf(param, "s", x_nu, nu, y_new - nu, step, depth, rho, max_halvings=0)
        x, y = float(xs[0]), y_new
    return x, y


def _unstable_anchor(param):
    return find_fixed_point(param, -1.0 / 12.0).point


@dataclass(frozen=True)
class Footprint:
    """An unstable footprint on the sigma_+ circle.

    ``w`` is the x-coordinate on the unstable leaf of p_u that generates it,
    ``branch`` the integer lift level of the first image (iterates=1) or 0.
    """

    X: float  # lift of the footprint x-coordinate
    y: float
    w: float
    branch: int
    iterates: int


class UnstableFootprints:
    """Footprints of W^u(p_u) on the sigma_+ circle for one parameter value.

    The unstable leaf of p_u is a graph y = v(x).  Long transports from p_u use
    a fixed number of RK4 steps so that footprints depend smoothly on k; short
    corrections start from a nearby base point.
    """

    def __init__(self, param: Parameter, iterates: int = 1, depth: int = 12, rho: Optional[RhoSpec] = None, step: float = LEAF_STEP):
        if iterates not in (0, 1):
            raise ValueError("iterates must be 0 or 1")
        self.param = param
        self.k = param.k
        self.iterates = iterates
        self.depth = depth
        self.rho = rho if rho is not None else default_rho(param)
        self.step = step
        self.n_long = int(math.ceil(0.5 / step))
        self.nu = critical_points(param).nu_plus
        self.pu = _unstable_anchor(param)
        # lift of p_u.x near -1/12 keeps the leaf parameter continuous
        self.pu_x = float(signed_diff(self.pu.x, 0.0))

    def _slope(self, y, x):
        return unstable_slopes(self.param, x, y, self.depth, self.rho)[0]

    def leaf_height(self, w):
        """v(w) transported from p_u in a fixed number of steps."""
        w = np.atleast_1d(np.asarray(w, float))
        dt = (w - self.pu_x) / self.n_long
        return _rk4(self._slope, np.full_like(w, self.pu.y), np.full_like(w, self.pu_x), dt, self.n_long)

    def _local(self, w0, v0, w, n=2):
        return _rk4(self._slope, v0, w0, (w - w0) / n, n)

    def _sigma(self, X):
        y, _, ok = sigma_values(self.param, wrap(np.atleast_1d(np.array(X, float))), "+", self.depth, self.rho)
        if not np.all(ok):
            raise NoBracketError("sigma_+ root failed at a footprint")
        return y

    def _refine(self, w0, v0, m, iters: int = 6):
        """Vectorised solve of X1(w) = m + sigma(X2(w)) starting from base points (w0, v0)."""
        k = self.k
        w = w0.copy()
        target = m + self.nu
        for outer in range(4):
            for _ in range(iters):
                v = self._local(w0, v0, w)
                X1 = first_coordinate_lift(k, w, v)
                d = slope_coefficient(k, w) - self._slope(v, w)
                w = w - (X1 - target) / d
            v = self._local(w0, v0, w)
            X1 = first_coordinate_lift(k, w, v)
            X2 = first_coordinate_lift(k, X1, w)
            new_target = m + self.nu + signed_diff(self._sigma(X2), self.nu)
            done = np.max(np.abs(new_target - target)) < 1e-15
            target = new_target
            if done:
                break
        v = self._local(w0, v0, w)
        X1 = first_coordinate_lift(k, w, v)
        X2 = first_coordinate_lift(k, X1, w)
        return w, X1, X2

    def footprint_iter0(self):
        zx = np.array([self.nu])
        v0 = self.leaf_height(zx)
        z0 = zx.copy()
        for _ in range(6):
            v = self._local(z0, v0, zx)
            X = first_coordinate_lift(self.k, zx, v)
            zx = self.nu + signed_diff(self._sigma(X), self.nu)
        v = self._local(z0, v0, zx)
        X = first_coordinate_lift(self.k, zx, v)
        return [Footprint(float(X[0]), float(zx[0]), float(zx[0]), 0, 0)]

    def footprint_iter1(self, sub: int = 64):
        """All footprints of f(W^u_loc(p_u)) over one turn of the leaf around p_u."""
        half = self.n_long
        h = 0.5 / half
        fwd = _rk4(self._slope, np.array([self.pu.y]), np.array([self.pu_x]), h, half, keep=True)[1]
        bwd = _rk4(self._slope, np.array([self.pu.y]), np.array([self.pu_x]), -h, half, keep=True)[1]
        nodes_v = np.concatenate([np.concatenate(bwd[::-1]), np.concatenate(fwd[1:])])
        nodes_w = self.pu_x + h * np.arange(-half, half + 1)
        # subsample between nodes with one short step each
        frac = np.arange(sub) / sub
        base_w = np.repeat(nodes_w[:-1], sub)
        base_v = np.repeat(nodes_v[:-1], sub)
        ws = base_w + np.tile(frac, nodes_w.size - 1) * h
        vs = self._local(base_w, base_v, ws, n=1)
        g = first_coordinate_lift(self.k, ws, vs) - self.nu
        lo = np.floor(np.minimum(g[:-1], g[1:]))
        hi = np.floor(np.maximum(g[:-1], g[1:]))
        idx, ms = [], []
        for i in np.nonzero(hi > lo)[0]:
            for m in range(int(lo[i]) + 1, int(hi[i]) + 1):
                idx.append(i)
                ms.append(m)
        if not idx:
            return []
        idx = np.array(idx)
        ms = np.array(ms, float)
        w0, v0 = ws[idx], vs[idx]
        w, X1, X2 = self._refine(w0, v0, ms)
        return [Footprint(float(a), float(b - m), float(c), int(m), 1) for a, b, c, m in zip(X2, X1, w, ms)]

    def track(self, m: int, w_guess: float) -> Footprint:
        """Footprint on branch m (X1(w) = m + sigma) continued from ``w_guess``."""
        w0 = np.array([w_guess])
        v0 = self.leaf_height(w0)
        w, X1, X2 = self._refine(w0, v0, np.array([float(m)]))
        return Footprint(float(X2[0]), float(X1[0] - m), float(w[0]), int(m), 1)

    def all(self):
        return self.footprint_iter0() if self.iterates == 0 else self.footprint_iter1()


def _footprint_at(param, fp: Footprint, depth, step):
    """Continue a footprint to a new parameter value."""
    uf = UnstableFootprints(param, fp.iterates, depth, None, step)
    if fp.iterates == 0:
        return uf.footprint_iter0()[0]
    return uf.track(fp.branch, fp.w)


def transfer_map_deviation(param: Parameter, n: int = 256, depth: int = 12, rho: Optional[RhoSpec] = None, h: float = 1e-5) -> dict:
    """C^1 distance of the vertical-circle -> sigma_+ transfer map from an isometry v -> c - v."""
    if rho is None:
        rho = default_rho(param)
    nu = critical_points(param).nu_plus
    k = param.k

    def T(v):
        u = np.full_like(v, nu)
        for _ in range(6):
            X = first_coordinate_lift(k, u, v)
            u = nu + signed_diff(sigma_values(param, wrap(X.copy()), "+", depth, rho)[0], nu)
        return first_coordinate_lift(k, u, v)

    vs = np.arange(n) / n
    Tv = T(vs)
    resid = Tv + vs
    resid = resid - np.round(resid - resid[0])
    c = 0.5 * (resid.max() + resid.min())
    c0 = float(np.max(np.abs(resid - c)))
    dT = (T(vs + h) - T(vs - h)) / (2 * h)
    c1 = float(np.max(np.abs(dT + 1.0)))
    bound = 1.0 / (81.0 * k * k)
    return {"c0": c0, "c1": c1, "distance": max(c0, c1), "bound": bound, "ok": max(c0, c1) <= bound}


# ---------------------------------------------------------------------------
# unfolding speeds and the parameter search


def _offset(param, fp_seed, depth, step):
    rho = default_rho(param)
    xs, _ = stable_footprint(param, depth, rho, step)
    fp = _footprint_at(param, fp_seed, depth, step)
    return fp.X - xs, fp, xs


def unfolding_speed(param: Parameter, dk: float = 1e-4, iterates: int = 1, depth: int = 12, footprint: Optional[Footprint] = None, step: float = LEAF_STEP) -> Tuple[float, float]:
    """Parameter speeds of the F^s(p_s) footprint and of a G^u footprint (central differences).

    The G^u leaf is the one whose footprint is nearest to that of F^s(p_s)
    unless ``footprint`` is given.
    """
    if footprint is None:
        footprint = nearest_footprint(param, iterates, depth, step)[0]
    lo, hi = param.with_k(param.k - dk), param.with_k(param.k + dk)
    xs_lo, _ = stable_footprint(lo, depth, None, step)
    xs_hi, _ = stable_footprint(hi, depth, None, step)
    fp_lo = _footprint_at(lo, footprint, depth, step)
    fp_hi = _footprint_at(hi, footprint, depth, step)
    speed_s = (xs_hi - xs_lo) / (2 * dk)
    speed_g = (fp_hi.X - fp_lo.X) / (2 * dk)
    return float(speed_s), float(speed_g)


def nearest_footprint(param: Parameter, iterates: int = 1, depth: int = 12, step: float = LEAF_STEP):
    """The unstable footprint closest (along the circle) to the stable footprint of p_s."""
    xs, _ = stable_footprint(param, depth, None, step)
    fps = UnstableFootprints(param, iterates, depth, None, step).all()
    if not fps:
        raise NoSolutionError("no unstable footprints found", stage="tangency")
    offs = [float(signed_diff(fp.X, xs)) for fp in fps]
    i = int(np.argmin(np.abs(offs)))
    return fps[i], offs[i], xs


def find_heteroclinic_tangency(param: Parameter, iterates: int = 1, depth: int = 12, scan_resolution: Optional[float] = None, step: float = LEAF_STEP, override: bool = False, xtol: float = 1e-13) -> TangencyEvent:
    """Parameter r, |r - k| < 4/k^{1/3}, where the F^s(p_s) footprint meets a W^u(p_u) footprint.

    Candidate footprints at r = k are ranked by their predicted root (offset /
    unit speed).  For each, the signed offset lift is scanned at
    ``scan_resolution`` (default 4/(100 k^{1/3})) outward from the prediction
    until a sign change is found, then refined with Brent's method.  Among the
    roots the one with smallest |r - k| wins (ties toward smaller r).
    """
    param.require_large(override)
    k = param.k
    window = 4.0 / abs(k) ** (1.0 / 3.0)
    if scan_resolution is None:
        scan_resolution = 4.0 / (100.0 * abs(k) ** (1.0 / 3.0))
    xs0, _ = stable_footprint(param, depth, None, step)
    fps = UnstableFootprints(param, iterates, depth, None, step).all()
    # lift n so that offset at r = k lies in [-1/2, 1/2)
    cands = []
    for fp in fps:
        off = fp.X - xs0
        n = round(off)
        cands.append((abs(off - n), fp, n))
    cands.sort(key=lambda c: c[0])
    profile = []
    best = None
    for dist, fp, n in cands:
        # offsets move at speed ~1 in r, so far candidates cannot beat a found root
        if best is not None and 0.5 * dist > abs(best[0] - k):
            break
        if dist > window + 0.1:
            break

        def g(r, fp=fp, n=n):
            off, _, _ = _offset(param.with_k(r), fp, depth, step)
            return off - n

        g0 = fp.X - xs0 - n
        # offsets move at speed ~ +1, predicted root r ~ k - g0
        centre = k - g0
        found = None
        for j in range(0, int(2 * window / scan_resolution) + 2):
            for sgn in ((1,) if j == 0 else (-1, 1)):
                a = centre + sgn * j * scan_resolution
                b = a + scan_resolution
                if a <= k - window or b >= k + window:
                    continue
                try:
                    ga, gb = g(a), g(b)
                except (NoSolutionError, SingularRegionError):
                    continue
                profile.append((a, ga))
                if ga == 0 or ga * gb < 0:
                    found = (a, b)
                    break
            if found:
                break
        if not found:
            continue
        r = brentq(g, found[0], found[1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        if best is None or (abs(r - k), r) < (abs(best[0] - k), best[0]):
            best = (r, fp, n)
    if best is None:
        raise NoBracketError("no sign change of the footprint offset inside the window", profile=profile)
    r, fp, n = best
    pr = param.with_k(r)
    off, fp_r, xs_r = _offset(pr, fp, depth, step)
    residual = abs(off - n)
    y = _sigma_scalar(pr, wrap(fp_r.X), depth, default_rho(pr))
    q = TorusPoint(fp_r.X, y)
    gap = curvature_gap(pr, q, depth)
    speed_s, speed_g = unfolding_speed(pr, 1e-4, iterates, depth, fp_r, step)
    matched = {"branch": fp_r.branch, "leaf_x": fp_r.w, "iterates": iterates, "stable_footprint_x": xs_r}
    return TangencyEvent(k, r, q, gap, speed_s, speed_g, residual, matched)


# ---------------------------------------------------------------------------
# tangency Cantor sets


def tangency_cantor_sets(param: Parameter, cantor, depth: int = 12, rho: Optional[RhoSpec] = None) -> TangencyCantorSets:
    """Cover endpoints moved onto the sigma_+ circle.

    K^s_h: from C_s along the stable leaf.  K^u_h: the same coordinates read on
    C_u, moved along the unstable leaf and pushed forward once by f_k, so that
    they land on sigma_+ along G^u.
    """
    if rho is None:
        rho = default_rho(param)
    k = param.k
    nu = critical_points(param).nu_plus
    ends = np.unique(wrap(np.array([e for iv in cantor.intervals for e in (iv.left, iv.right)])))
    # stable side: x(y) ~ x + alpha_s (y - nu) over a tiny height
    a_s, _, _ = stable_slopes(param, ends, np.full_like(ends, nu), depth, rho)
    x = ends.copy()
    for _ in range(3):
        y = sigma_values(param, wrap(x), "+", depth, rho)[0]
        x = ends + a_s * (y - nu)
    ksh = wrap(x)
    # unstable side
    a_u, _, _ = unstable_slopes(param, np.full_like(ends, nu), ends, depth, rho)
    u = np.full_like(ends, nu)
    for _ in range(4):
        v = ends + a_u * (u - nu)
        X = first_coordinate_lift(k, u, v)
        u = nu + signed_diff(sigma_values(param, wrap(X), "+", depth, rho)[0], nu)
    v = ends + a_u * (u - nu)
    kuh = wrap(first_coordinate_lift(k, u, v))
    srt = np.sort(kuh)
    pos = np.searchsorted(srt, ksh)
    left = srt[(pos - 1) % srt.size]
    right = srt[pos % srt.size]
    near = np.minimum(circle_distance(ksh, left), circle_distance(ksh, right))
    return TangencyCantorSets(ksh, kuh, cantor.level, float(np.max(near)), 7.0 / (2.0 * param.cube_root))
