"""The standard family f_k(x, y) = (-y + 2x + k sin 2pi x, x) on the torus R^2/Z^2.

Also hosts the singular perturbation g_k = f_k + (rho_k(x), 0) with a pluggable
profile, plus the circle helpers shared by the rest of the package.  Scalar
entry points take and return :class:`TorusPoint`; the ``*_arrays`` variants are
vectorised over numpy arrays and are what the heavier modules call.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import NoSolutionError, ParameterGuardError, PoleError

TWO_PI = 2.0 * math.pi

DEFAULT_K_MIN_GUARD = float(os.environ.get("HORSESHOE_K_MIN_GUARD", "30"))


# ---------------------------------------------------------------------------
# circle helpers


def wrap(x):
    """Reduce into [0, 1)."""
    r = np.mod(x, 1.0)
    # np.mod can return 1.0 for tiny negative inputs
    if np.ndim(r) == 0:
        return 0.0 if r >= 1.0 else float(r)
    r[r >= 1.0] = 0.0
    return r


def signed_diff(a, b):
    """Representative of a - b in [-1/2, 1/2)."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


def circle_distance(a, b):
    return np.abs(signed_diff(a, b))


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", wrap(float(self.x)))
        object.__setattr__(self, "y", wrap(float(self.y)))

    def distance(self, other: "TorusPoint") -> float:
        """Max-norm distance with wraparound."""
        return float(max(circle_distance(self.x, other.x), circle_distance(self.y, other.y)))

    def swap(self) -> "TorusPoint":
        return TorusPoint(self.y, self.x)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Parameter:
    """Coupling k plus the threshold standing in for the unspecified k_0."""

    k: float
    k_min_guard: float = DEFAULT_K_MIN_GUARD

    def require_large(self, override: bool = False) -> None:
        if not override and abs(self.k) < self.k_min_guard:
            raise ParameterGuardError(
                f"|k|={abs(self.k):g} below k_min_guard={self.k_min_guard:g}; pass override=True to force"
            )

    @property
    def cube_root(self) -> float:
        return abs(self.k) ** (1.0 / 3.0)

    def with_k(self, k: float) -> "Parameter":
        return Parameter(k, self.k_min_guard)


@dataclass(frozen=True)
class Jacobian2:
    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def eigenvalues(self):
        tr, det = self.trace, self.det
        disc = tr * tr - 4.0 * det
        if disc >= 0:
            s = math.sqrt(disc)
            # avoid cancellation for the small root
            big = 0.5 * (tr + math.copysign(s, tr))
            return (big, det / big) if big != 0 else (0.0, 0.0)
        s = math.sqrt(-disc)
        return (complex(0.5 * tr, 0.5 * s), complex(0.5 * tr, -0.5 * s))


@dataclass(frozen=True)
class FixedPointRecord:
    point: TorusPoint
    branch_integer: int
    stability: str
    eigenvalues: tuple
    residual: float


@dataclass(frozen=True)
class CriticalData:
    nu_plus: float
    nu_minus: float
    strip_halfwidth: float
    residual: float
    asymptotic_constant: float  # |nu_plus - 1/4| * |k|


# ---------------------------------------------------------------------------
# the singular perturbation rho_k


@dataclass(frozen=True)
class RhoSpec:
    """Profile rho(x) with poles at ``poles`` and support in the strips around +-1/4.

    ``value`` and ``deriv`` are vectorised callables.  ``support_halfwidth`` is the
    contractual strip halfwidth 2/k^{1/3}; the profile may vanish on a larger set.
    """

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    poles: Tuple[float, float]
    support_halfwidth: float
    description: str = ""
    both: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None

    def value_and_deriv(self, x):
        if self.both is not None:
            return self.both(x)
        return self.value(x), self.deriv(x)

    def at_pole(self, x: float, tol: float = 0.0) -> bool:
        return any(float(circle_distance(x, p)) <= tol for p in self.poles)


def default_rho(param: Parameter, gamma: float = 8.0, inner: float = 0.6, outer: float = 1.2) -> RhoSpec:
    """Bump-windowed reciprocal-distance profile.

    Near nu_+ the profile is +gamma/|x - nu_+|, near nu_- it is -gamma/|x - nu_-|,
    so that rho' has the sign of the unperturbed derivative 2 + 2 pi k cos 2 pi x on
    both sides of each critical point and x -> 2x + k sin 2 pi x + rho(x) is expanding
    (|derivative| >~ 20 k^{2/3}).  The window equals 1 within ``inner``/k^{1/3} of
    +-1/4 and 0 beyond ``outer``/k^{1/3}; outer <= 2 keeps the support inside the
    strips |x -+ 1/4| <= 2/k^{1/3}.
    """
    if outer > 2.0 or inner >= outer:
        raise ValueError("need inner < outer <= 2")
    crit = critical_points(param)
    c = param.cube_root
    r1, r2 = inner / c, outer / c
    poles = (crit.nu_plus, crit.nu_minus)
    centres = (0.25, -0.25)
    signs = (1.0, -1.0)

    def scalar_both(x0):
        val = der = 0.0
        for pole, centre, sgn in zip(poles, centres, signs):
            uc = (x0 - centre + 0.5) % 1.0 - 0.5
            t = abs(uc)
            if t >= r2:
                continue
            s = (t - r1) / (r2 - r1)
            if s <= 0.0:
                w, dw = 1.0, 0.0
            else:
                a = math.exp(-1.0 / s)
                b = math.exp(-1.0 / (1.0 - s)) if s < 1.0 else 0.0
                da = a / (s * s)
                db = b / ((1.0 - s) ** 2) if s < 1.0 else 0.0
                den = a + b
                w = 1.0 - a / den
                dw = -((da * b + a * db) / den**2) / (r2 - r1)
            u = (x0 - pole + 0.5) % 1.0 - 0.5
            if u == 0.0:
                return sgn * math.inf, math.inf
            au = abs(u)
            sg_uc = math.copysign(1.0, uc) if uc != 0.0 else 0.0
            val += sgn * gamma * w / au
            der += sgn * gamma * (dw * sg_uc / au - w * math.copysign(1.0, u) / (u * u))
        return val, der

    def both(x):
        x = np.asarray(x, dtype=float)
        if x.size == 1:
            v, d = scalar_both(float(x.reshape(-1)[0]))
            return np.full_like(x, v), np.full_like(x, d)
        xf = x.ravel()
        val = np.zeros_like(xf)
        der = np.zeros_like(xf)
        inv_span = 1.0 / (r2 - r1)
        for pole, centre, sgn in zip(poles, centres, signs):
            uc = np.mod(xf - centre + 0.5, 1.0) - 0.5
            idx = np.flatnonzero(np.abs(uc) < r2)
            if idx.size == 0:
                continue
            ucl = uc[idx]
            s = (np.abs(ucl) - r1) * inv_span
            w = np.ones_like(s)
            dw = np.zeros_like(s)
            mid = s > 0
            if np.any(mid):
                sm = s[mid]
                a = np.exp(-1.0 / sm)
                b = np.exp(-1.0 / (1.0 - sm))
                den = a + b
                w[mid] = b / den
                dw[mid] = -a * b * (1.0 / sm**2 + 1.0 / (1.0 - sm) ** 2) / den**2 * inv_span
            u = np.mod(xf[idx] - pole + 0.5, 1.0) - 0.5
            au = np.abs(u)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = sgn * gamma * w / au
                d = sgn * gamma * (dw * np.sign(ucl) / au - w * np.sign(u) / u**2)
            d[au == 0.0] = np.inf
            val[idx] += v
            der[idx] += d
        return val.reshape(x.shape), der.reshape(x.shape)

    def value(x):
        return both(x)[0]

    def deriv(x):
        return both(x)[1]

    return RhoSpec(
        value=value,
        deriv=deriv,
        poles=poles,
        support_halfwidth=2.0 / c,
        both=both,
        description=f"gamma={gamma} window [{inner},{outer}]/k^(1/3)",
    )


# ---------------------------------------------------------------------------
# vectorised kernels


def slope_coefficient(k: float, x):
    """2 + 2 pi k cos 2 pi x, the (1,1) Jacobian entry of f_k."""
    return 2.0 + TWO_PI * k * np.cos(TWO_PI * np.asarray(x, dtype=float))


def first_coordinate_lift(k: float, x, y, rho: Optional[RhoSpec] = None):
    """-y + 2x + k sin 2 pi x (+ rho(x)) without reduction mod 1."""
    x = np.asarray(x, dtype=float)
    out = -np.asarray(y, dtype=float) + 2.0 * x + k * np.sin(TWO_PI * x)
    if rho is not None:
        out = out + rho.value(np.atleast_1d(x)).reshape(np.shape(x))
    return out


def forward_arrays(k: float, x, y, rho: Optional[RhoSpec] = None):
    return wrap(np.atleast_1d(first_coordinate_lift(k, x, y, rho))), wrap(np.atleast_1d(np.asarray(x, float)))


def inverse_arrays(k: float, u, v, rho: Optional[RhoSpec] = None):
    # S f S with S(x, y) = (y, x)
    return wrap(np.atleast_1d(np.asarray(v, float))), wrap(np.atleast_1d(first_coordinate_lift(k, v, u, rho)))


def derivative_coefficient(k: float, x, rho: Optional[RhoSpec] = None):
    out = slope_coefficient(k, x)
    if rho is not None:
        out = out + rho.deriv(np.atleast_1d(np.asarray(x, float))).reshape(np.shape(x))
    return out


# ---------------------------------------------------------------------------
# scalar operations


def apply(param: Parameter, p: TorusPoint) -> TorusPoint:
    x, y = p.x, p.y
    return TorusPoint(-y + 2.0 * x + param.k * math.sin(TWO_PI * x), x)


def apply_inverse(param: Parameter, p: TorusPoint) -> TorusPoint:
    u, v = p.x, p.y
    return TorusPoint(v, -u + 2.0 * v + param.k * math.sin(TWO_PI * v))


def jacobian(param: Parameter, p: TorusPoint) -> Jacobian2:
    return Jacobian2(2.0 + TWO_PI * param.k * math.cos(TWO_PI * p.x), -1.0, 1.0, 0.0)


def critical_points(param: Parameter, tol: float = 1e-14) -> CriticalData:
    """Roots of 2 + 2 pi k cos 2 pi x nearest +-1/4; nu_- is reported as the lift -nu_+."""
    k = param.k
    if abs(k) <= 1.0 / math.pi:
        raise NoSolutionError(f"cos(2 pi x) = -1/(pi k) has no solution for |k|={abs(k):g} <= 1/pi", stage="critical")
    x = math.acos(-1.0 / (math.pi * k)) / TWO_PI
    for _ in range(20):
        f = 2.0 + TWO_PI * k * math.cos(TWO_PI * x)
        df = -TWO_PI * TWO_PI * k * math.sin(TWO_PI * x)
        step = f / df
        x -= step
        if abs(step) < tol:
            break
    res = abs(2.0 + TWO_PI * k * math.cos(TWO_PI * x))
    return CriticalData(
        nu_plus=x,
        nu_minus=-x,
        strip_halfwidth=2.0 / param.cube_root,
        residual=res,
        asymptotic_constant=abs(x - 0.25) * abs(k),
    )


def fixed_points(param: Parameter, dedup: float = 1e-8) -> List[FixedPointRecord]:
    """All fixed points: x = y with k sin 2 pi x = m for integers |m| <= |k|.

    Both arcsine branches are used as seeds and polished by Newton.
    """
    k = param.k
    out: List[FixedPointRecord] = []
    seen: List[float] = []
    mmax = int(math.floor(abs(k)))
    for m in range(-mmax, mmax + 1):
        if k == 0:
            if m != 0:
                continue
            seeds = [0.0, 0.5]
        else:
            s = max(-1.0, min(1.0, m / k))
            x1 = math.asin(s) / TWO_PI
            seeds = [x1, 0.5 - x1]
        for x in seeds:
            for _ in range(8):
                df = TWO_PI * k * math.cos(TWO_PI * x)
                if df == 0:
                    break
                step = (k * math.sin(TWO_PI * x) - m) / df
                x -= step
                if abs(step) < 1e-16:
                    break
            xw = wrap(x)
            if any(circle_distance(xw, s0) < dedup for s0 in seen):
                continue
            seen.append(xw)
            pt = TorusPoint(xw, xw)
            jac = jacobian(param, pt)
            tr = jac.trace
            if abs(abs(tr) - 2.0) <= 1e-12:
                stability = "parabolic"
            elif abs(tr) > 2.0:
                stability = "saddle"
            else:
                stability = "elliptic"
            out.append(
                FixedPointRecord(
                    point=pt,
                    branch_integer=m,
                    stability=stability,
                    eigenvalues=jac.eigenvalues(),
                    residual=abs(k * math.sin(TWO_PI * x) - m),
                )
            )
    out.sort(key=lambda r: r.point.x)
    return out


def find_fixed_point(param: Parameter, near: float) -> FixedPointRecord:
    """The fixed point closest (circle metric) to (near, near)."""
    return min(fixed_points(param), key=lambda r: float(circle_distance(r.point.x, near)))


def g_apply(param: Parameter, rho: RhoSpec, p: TorusPoint) -> TorusPoint:
    if rho.at_pole(p.x):
        raise PoleError(f"x={p.x!r} is a pole of rho")
    r = float(rho.value(np.array([p.x]))[0])
    return TorusPoint(-p.y + 2.0 * p.x + param.k * math.sin(TWO_PI * p.x) + r, p.x)


def g_apply_inverse(param: Parameter, rho: RhoSpec, p: TorusPoint) -> TorusPoint:
    return g_apply(param, rho, p.swap()).swap()


def orbit(param: Parameter, p: TorusPoint, n: int, direction: str = "forward") -> List[TorusPoint]:
    if n < 0:
        raise ValueError("n must be >= 0")
    step = {"forward": apply, "backward": apply_inverse}[direction]
    pts = [p]
    for _ in range(n):
        pts.append(step(param, pts[-1]))
    return pts
