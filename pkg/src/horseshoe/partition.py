"""The singular circle map Psi, Markov partitions and Cantor-set covers.

Psi acts on the horizontal circle C_s = {y = nu_+}: the point x goes to
g_k(x, nu_+) and is then slid back to C_s along its stable leaf.  All values
are lifts; within a partition interval (which never contains a pole) the lift
is continuous and strictly monotone, so each interval is a single branch.

Covers are computed for any object exposing the small ``CircleMap`` protocol
(``lift``, ``deriv``, ``poles``), which lets the affine test maps share the
refinement code with Psi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import BranchError, CoverTooLargeError, NoBracketError, SingularRegionError
from .foliation import integrate_leaf, project_stable, project_unstable
from .torus_map import (
    Parameter,
    RhoSpec,
    TorusPoint,
    critical_points,
    default_rho,
    derivative_coefficient,
    find_fixed_point,
    first_coordinate_lift,
    signed_diff,
)

ROOT_TOL = 1e-9
PSI_STEP = 1.0 / 32
PSI_DEPTH = 6
ENDPOINT_DEPTH = 80
MAX_COVER = 200_000


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class CircleInterval:
    """Arc [left, right] given by real lifts; 0 < right - left <= 1."""

    left: float
    right: float

    def __post_init__(self):
        if not (self.right > self.left and self.right - self.left <= 1.0):
            raise ValueError(f"bad circle interval [{self.left}, {self.right}]")

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.left + self.right)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return (x - self.left + tol) % 1.0 <= self.length + 2 * tol

    def contains_interval(self, other: "CircleInterval", tol: float = 1e-12) -> bool:
        # translate other so that its left end is the first lift >= self.left
        lo = other.left + math.ceil(self.left - other.left - tol)
        return lo + other.length <= self.right + tol

    def overlaps(self, other: "CircleInterval") -> bool:
        a = (other.left - self.left) % 1.0
        b = (self.left - other.left) % 1.0
        return a < self.length or b < other.length

    def as_tuple(self) -> Tuple[float, float]:
        return (self.left, self.right)


def hull(intervals: Sequence[CircleInterval]) -> CircleInterval:
    """Arc running counterclockwise from the first interval's left end to the last one's right end."""
    first, last = intervals[0], intervals[-1]
    right = last.right + math.floor(first.left - last.left)
    while right <= first.left:
        right += 1.0
    while right - first.left > 1.0:
        right -= 1.0
    return CircleInterval(first.left, right)


# ---------------------------------------------------------------------------
# the circle map


class PsiMap:
    """Psi_k on C_s.  ``mode`` is "raw" (first coordinate of g_k(x, nu_+)) or "corrected"."""

    def __init__(self, param: Parameter, mode: str = "corrected", depth: int = PSI_DEPTH, rho: Optional[RhoSpec] = None, step: float = PSI_STEP):
        if mode not in ("raw", "corrected"):
            raise ValueError("mode must be raw or corrected")
        self.param = param
        self.k = param.k
        self.mode = mode
        self.depth = depth
        self.rho = rho if rho is not None else default_rho(param)
        self.step = step
        self.nu = critical_points(param).nu_plus
        self.poles = self.rho.poles

    def raw(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            return first_coordinate_lift(self.k, x, self.nu, self.rho)

    def raw_deriv(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            return derivative_coefficient(self.k, x, self.rho)

    def lift(self, x):
        X = self.raw(x)
        if self.mode == "raw":
            return X
        x = np.atleast_1d(np.asarray(x, float))
        # g(x, nu) = (X, x); slide along the stable leaf from y = x back to y = nu
        delta = signed_diff(self.nu, x)
        u, _ = integrate_leaf(self.param, "s", X, x, delta, self.step, self.depth, self.rho, max_halvings=0)
        if not np.all(np.isfinite(u)):
            raise SingularRegionError("stable projection hit a singular point", stage="psi")
        return u

    def deriv(self, x, h: float = 1e-7):
        if self.mode == "raw":
            return self.raw_deriv(x)
        x = np.atleast_1d(np.asarray(x, float))
        both = self.lift(np.concatenate([x + h, x - h]))
        return (both[: x.size] - both[x.size:]) / (2 * h)

    def dual_lift(self, y):
        """(nu_+, Psi(y)) = pi_u(g^{-1}(nu_+, y)), the reversed construction."""
        y = np.atleast_1d(np.asarray(y, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            Y = first_coordinate_lift(self.k, y, self.nu, self.rho)
        if self.mode == "raw":
            return Y
        delta = signed_diff(self.nu, y)
        u, _ = integrate_leaf(self.param, "u", Y, y, delta, self.step, self.depth, self.rho, max_halvings=0)
        return u


def psi(param: Parameter, x: float, mode: str = "corrected", depth: int = PSI_DEPTH, rho: Optional[RhoSpec] = None) -> float:
    return float(PsiMap(param, mode, depth, rho).lift(x)[0])


def psi_report(param: Parameter, x: float, depth: int = 12, rho: Optional[RhoSpec] = None) -> dict:
    """Raw and corrected values with the displacement bound max|alpha_s| * leaf height."""
    from .foliation import stable_slopes

    m = PsiMap(param, "corrected", depth, rho)
    raw = float(m.raw(x)[0])
    cor = float(m.lift(x)[0])
    ys = np.linspace(x, x + float(signed_diff(m.nu, x)), 33)
    xs = raw + (cor - raw) * (ys - ys[0]) / (ys[-1] - ys[0]) if ys[-1] != ys[0] else np.full_like(ys, raw)
    a, _, _ = stable_slopes(param, xs, ys, depth, m.rho)
    height = abs(float(signed_diff(m.nu, x)))
    bound = float(np.max(np.abs(a))) * height
    return {"x": x, "raw": raw, "corrected": cor, "displacement": abs(cor - raw), "bound": bound}


# ---------------------------------------------------------------------------
# root finding on monotone pieces


def _pieces(lo: float, hi: float, poles: Sequence[float], guard: float = 1e-9):
    """Split [lo, hi] at the lifts of the poles it contains."""
    cuts = []
    for p in poles:
        base = p + math.ceil(lo - p)
        while base < hi:
            cuts.append(base)
            base += 1.0
    cuts.sort()
    out, a = [], lo
    for c in cuts:
        if c - guard > a:
            out.append((a, c - guard))
        a = c + guard
    if hi > a:
        out.append((a, hi))
    return out


def solve_in_window(fn, lo: float, hi: float, nominal: float, poles: Sequence[float] = (), grid: int = 4000, tol: float = 1e-14):
    """Solutions x in [lo, hi] of fn(x) in Z, nearest ``nominal`` first.

    ``fn`` is vectorised and continuous away from the poles.  Returns
    (x, integer, alternatives) where alternatives lists the other roots found.
    """
    roots = []
    for a, b in _pieces(lo, hi, poles):
        xs = np.linspace(a, b, grid + 1)
        vs = fn(xs)
        fl = np.floor(vs)
        for i in np.nonzero(fl[1:] != fl[:-1])[0]:
            lo_m, hi_m = sorted((fl[i], fl[i + 1]))
            if hi_m - lo_m > 64:
                # a cell next to a pole winds too often to be useful
                continue
            for m in range(int(lo_m) + 1, int(hi_m) + 1):
                roots.append((xs[i], xs[i + 1], m))
    if not roots:
        raise NoBracketError(f"no root in window [{lo}, {hi}]")
    roots.sort(key=lambda r: (abs(0.5 * (r[0] + r[1]) - nominal), r[0]))
    out = []
    for a, b, m in roots[:3]:
        g = lambda t, m=m: float(fn(np.array([t]))[0]) - m
        out.append((brentq(g, a, b, xtol=tol, rtol=4 * np.finfo(float).eps), m))
    out.sort(key=lambda r: (abs(r[0] - nominal), r[0]))
    return out[0][0], out[0][1], [r[0] for r in out[1:]]


# ---------------------------------------------------------------------------
# partitions


@dataclass
class MarkovPartition:
    intervals: Dict[str, CircleInterval]
    endpoints: Dict[str, float]
    boundary_spec: List[Tuple[str, str]]
    residuals: Dict[str, float]
    case_tag: str
    k: float
    mode: str = "corrected"
    windows: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    window_ok: Dict[str, bool] = field(default_factory=dict)
    alternatives: Dict[str, List[float]] = field(default_factory=dict)
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def names(self) -> List[str]:
        return list(self.intervals)

    @property
    def hull(self) -> CircleInterval:
        return hull(list(self.intervals.values()))

    def lengths(self) -> Dict[str, float]:
        return {n: iv.length for n, iv in self.intervals.items()}

    def disjoint(self) -> bool:
        ivs = list(self.intervals.values())
        return not any(ivs[i].overlaps(ivs[j]) for i in range(len(ivs)) for j in range(i + 1, len(ivs)))

    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def to_dict(self) -> dict:
        return {
            "case": self.case_tag,
            "k": self.k,
            "mode": self.mode,
            "intervals": {n: [iv.left, iv.right] for n, iv in self.intervals.items()},
            "endpoints": self.endpoints,
            "boundary_spec": [list(b) for b in self.boundary_spec],
            "residuals": self.residuals,
            "windows": {n: list(w) for n, w in self.windows.items()},
            "window_ok": self.window_ok,
            "alternatives": self.alternatives,
            "hull": [self.hull.left, self.hull.right],
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _residual(m, x, target):
    return abs(float(signed_diff(float(m.lift(x)[0]), target)))


def build_duarte_partition(param: Parameter, mode: str = "corrected", depth: int = PSI_DEPTH, override: bool = False) -> MarkovPartition:
    """J_0 = [a, b], J_1 = [b', a' + 1] with Psi(a) = a = Psi(a'), Psi(b) = a' = Psi(b').

    Endpoints lie 3..4 k^{-1/3} away from -1/4, 1/4, -1/4, 1/4 respectively;
    the root nearest each window's midpoint is taken.
    """
    param.require_large(override)
    m = PsiMap(param, mode, depth)
    d = 1.0 / param.cube_root
    win = {
        "a": (-0.25 + 3 * d, -0.25 + 4 * d),
        "b": (0.25 - 4 * d, 0.25 - 3 * d),
        "a'": (-0.25 - 4 * d, -0.25 - 3 * d),
        "b'": (0.25 + 3 * d, 0.25 + 4 * d),
    }
    alts = {}
    lo, hi = win["a"]
    a, _, alts["a"] = solve_in_window(lambda x: m.lift(x) - x, lo, hi, 0.5 * (lo + hi), m.poles)
    ends = {"a": a}
    for name, target in (("a'", "a"), ("b", "a'"), ("b'", "a'")):
        lo, hi = win[name]
        t = ends[target]
        ends[name], _, alts[name] = solve_in_window(lambda x, t=t: m.lift(x) - t, lo, hi, 0.5 * (lo + hi), m.poles)
    spec = [("a", "a"), ("a'", "a"), ("b", "a'"), ("b'", "a'")]
    res = {e: _residual(m, ends[e], ends[t]) for e, t in spec}
    a, b, ap, bp = ends["a"], ends["b"], ends["a'"], ends["b'"]
    # lifts with J_0 = [a, b] and J_1 = [b', a' + 1] of positive length
    b_l = b + math.ceil(a - b + 1e-15)
    ap_l = ap + math.ceil(bp - ap + 1e-15)
    intervals = {"J0": CircleInterval(a, b_l), "J1": CircleInterval(bp, ap_l)}
    offsets = {"a": a + 0.25, "b": 0.25 - b, "a'": -0.25 - ap, "b'": bp - 0.25}
    ok = {n: 3 * d < offsets[n] < 4 * d for n in offsets}
    part = MarkovPartition(intervals, ends, spec, res, "duarte", param.k, mode, win, ok, alts)
    rho = m.rho
    zs = np.concatenate([np.linspace(iv.left, iv.right, 2001) for iv in intervals.values()])
    part.extras["rho_free"] = float(np.max(np.abs(rho.value(zs)))) == 0.0
    return part


NOMINAL = {"a": 1.0 / 8, "b": 15.0 / 32, "c": 19.0 / 32, "d_former": -1.0 / 48, "d_latter": -7.0 / 48}


def partition_anchors(param: Parameter, depth: int = ENDPOINT_DEPTH, rho: Optional[RhoSpec] = None) -> Tuple[float, float]:
    """(pi_s(p_s), pi_u(p_u)) as lifts near 0 and -1/12."""
    if rho is None:
        rho = default_rho(param)
    ps = TorusPoint(0.0, 0.0)
    pu = find_fixed_point(param, -1.0 / 12.0).point
    s0 = project_stable(param, ps, depth, 1.0 / 128, rho)
    u0 = project_unstable(param, pu, depth, 1.0 / 128, rho)
    s0 = float(signed_diff(s0, 0.0))
    u0 = -1.0 / 12.0 + float(signed_diff(u0, -1.0 / 12.0))
    return s0, u0


def build_proof_partition(param: Parameter, case: str = "former", mode: str = "corrected", depth: int = PSI_DEPTH, override: bool = False) -> MarkovPartition:
    """I_-, I_0 = [pi_s(p_s), a], I_1 = [b, c] from the case-dependent boundary chain.

    former: Psi(c) = u0, Psi(b) = c = Psi(d), Psi(a) = d, I_- = [u0, d]
    latter: Psi(a) = u0, Psi(d) = s0, Psi(c) = d, Psi(b) = c, I_- = [d, u0]
    with s0 = pi_s(p_s), u0 = pi_u(p_u).  Each endpoint is the root inside its
    window nearest the nominal value (1/8, 15/32, 19/32, -1/48 or -7/48).
    """
    if case not in ("former", "latter"):
        raise ValueError("case must be former or latter")
    param.require_large(override)
    m = PsiMap(param, mode, depth)
    d_ = 1.0 / param.cube_root
    s0, u0 = partition_anchors(param, ENDPOINT_DEPTH, m.rho)
    win = {
        "a": (1.0 / 8, 1.0 / 8 + d_),
        "b": (15.0 / 32 - d_, 15.0 / 32),
        "c": (19.0 / 32, 19.0 / 32 + d_),
    }
    if case == "former":
        win["d"] = (-1.0 / 48, -1.0 / 48 + d_)
        chain = [("c", "u0"), ("b", "c"), ("d", "c"), ("a", "d")]
        nom_d = NOMINAL["d_former"]
    else:
        win["d"] = (-7.0 / 48 - d_, -7.0 / 48)
        chain = [("a", "u0"), ("d", "s0"), ("c", "d"), ("b", "c")]
        nom_d = NOMINAL["d_latter"]
    nominal = {"a": NOMINAL["a"], "b": NOMINAL["b"], "c": NOMINAL["c"], "d": nom_d}
    ends = {"s0": s0, "u0": u0}
    alts = {}
    for name, target in chain:
        lo, hi = win[name]
        t = ends[target]
        ends[name], _, alts[name] = solve_in_window(lambda x, t=t: m.lift(x) - t, lo, hi, nominal[name], m.poles)
    res = {e: _residual(m, ends[e], ends[t]) for e, t in chain}
    if case == "former":
        i_minus = CircleInterval(u0, ends["d"])
    else:
        i_minus = CircleInterval(ends["d"], u0)
    intervals = {"I-": i_minus, "I0": CircleInterval(s0, ends["a"]), "I1": CircleInterval(ends["b"], ends["c"])}
    ok = {n: win[n][0] <= ends[n] <= win[n][1] for n in win}
    part = MarkovPartition(intervals, {n: ends[n] for n in ("s0", "u0", "a", "b", "c", "d")}, chain, res, f"proof_{case}", param.k, mode, win, ok, alts)
    dev = {
        "I-": abs(i_minus.length - 1.0 / 16),
        "I0": abs(intervals["I0"].length - 1.0 / 8),
        "I1": abs(intervals["I1"].length - 1.0 / 8),
    }
    part.extras.update({f"length_deviation_{n}": v for n, v in dev.items()})
    part.extras["length_deviation_bound"] = 2.0 * d_
    return part


def synthetic_partition(intervals: Dict[str, Tuple[float, float]], case_tag: str = "synthetic") -> MarkovPartition:
    ivs = {n: CircleInterval(*lr) for n, lr in intervals.items()}
    return MarkovPartition(ivs, {}, [], {}, case_tag, float("nan"), "synthetic")


# ---------------------------------------------------------------------------
# Cantor covers


class AffineCircleMap:
    """x -> slope * x + offset (lift); the exact test map for covers."""

    poles: Tuple[float, ...] = ()

    def __init__(self, slope: float = 3.0, offset: float = 0.0):
        self.slope = slope
        self.offset = offset

    def lift(self, x):
        return self.slope * np.atleast_1d(np.asarray(x, float)) + self.offset

    def deriv(self, x):
        return np.full(np.atleast_1d(x).shape, self.slope)

    raw_deriv = deriv

    def inverse(self, t):
        return (np.asarray(t, float) - self.offset) / self.slope


@dataclass
class CantorApprox:
    level: int
    intervals: List[CircleInterval]
    deriv_min: np.ndarray
    deriv_max: np.ndarray
    cell: np.ndarray  # index of the partition interval containing each interval
    image: np.ndarray  # partition index of the first image (-1 at level 0)
    parent: np.ndarray  # index into the previous level's list (-1 at level 0)
    partition_lengths: np.ndarray
    hull_length: float

    @property
    def lengths(self) -> np.ndarray:
        return np.array([iv.length for iv in self.intervals])

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    def to_csv(self) -> str:
        rows = ["level,left,right,deriv_min,deriv_max"]
        for iv, lo, hi in zip(self.intervals, self.deriv_min, self.deriv_max):
            rows.append(f"{self.level},{iv.left:.17g},{iv.right:.17g},{lo:.17g},{hi:.17g}")
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "count": len(self.intervals),
            "total_length": self.total_length,
            "hull_length": self.hull_length,
            "intervals": [[iv.left, iv.right] for iv in self.intervals],
        }


def _invert(cmap, targets, lo, hi, grid: int = 64, iters: int = 60):
    """Solve cmap.lift(x) = t on the monotone piece [lo, hi] for all t (vectorised)."""
    targets = np.asarray(targets, float)
    if targets.size == 0:
        return targets
    if isinstance(cmap, AffineCircleMap):
        return cmap.inverse(targets)
    xs = np.linspace(lo, hi, grid + 1)
    vs = cmap.lift(xs)
    inc = vs[-1] > vs[0]
    order = vs if inc else vs[::-1]
    xo = xs if inc else xs[::-1]
    j = np.clip(np.searchsorted(order, targets) - 1, 0, grid - 1)
    a, b = xo[j], xo[j + 1]
    fa, fb = order[j] - targets, order[j + 1] - targets
    a, b = np.minimum(a, b), np.maximum(a, b)
    # secant start, then Newton on the raw derivative safeguarded by the bracket
    x = np.where(fb != fa, xo[j] - fa * (xo[j + 1] - xo[j]) / (fb - fa), 0.5 * (a + b))
    for _ in range(iters):
        f = cmap.lift(x) - targets
        pos = (f > 0) == inc
        b = np.where(pos, np.minimum(b, x), b)
        a = np.where(pos, a, np.maximum(a, x))
        d = cmap.raw_deriv(x)
        xn = x - f / d
        bad = ~((xn >= a) & (xn <= b)) | ~np.isfinite(xn)
        xn = np.where(bad, 0.5 * (a + b), xn)
        if np.max(np.abs(f)) < 1e-13 * max(1.0, np.max(np.abs(targets))):
            break
        x = xn
    return x


def _sample_derivs(cmap, lefts, rights, level, samples: int):
    """Bounds of |(cmap^level)'| sampled on each interval."""
    if level == 0:
        one = np.ones(len(lefts))
        return one, one
    t = np.linspace(0.0, 1.0, samples)
    pts = lefts[:, None] + (rights - lefts)[:, None] * t[None, :]
    flat = pts.ravel()
    prod = np.ones_like(flat)
    x = flat
    for _ in range(level):
        prod *= np.abs(cmap.deriv(x))
        x = cmap.lift(x)
    prod = prod.reshape(pts.shape)
    return prod.min(axis=1), prod.max(axis=1)


def _partition_list(partition):
    if isinstance(partition, MarkovPartition):
        return list(partition.intervals.values())
    return [iv if isinstance(iv, CircleInterval) else CircleInterval(*iv) for iv in partition]


def refine_cantor(cmap, partition, n: int, branch_grid: int = 64, derivative_samples: int = 5, max_intervals: int = MAX_COVER) -> CantorApprox:
    """Level-n cover: components of the points of the partition whose first n images stay in it.

    Level n is built from level n - 1: inside each partition interval P the
    cover is P ∩ Psi^{-1}(cover_{n-1}), found by inverting the monotone lift of
    Psi on P at every integer translate of the level n - 1 endpoints.
    """
    if n < 0:
        raise ValueError("level must be >= 0")
    parts = _partition_list(partition)
    for P in parts:
        for pole in getattr(cmap, "poles", ()):
            if P.contains(pole, 1e-12):
                raise BranchError(f"partition interval {P.as_tuple()} contains a pole")
    plens = np.array([P.length for P in parts])
    H = hull(parts).length
    # level 0
    cur = [P for P in parts]
    cell = np.arange(len(parts))
    image = np.full(len(parts), -1)
    parent = np.full(len(parts), -1)
    prev_cell = cell.copy()
    for level in range(1, n + 1):
        new_iv, new_cell, new_image, new_parent = [], [], [], []
        starts = np.array([iv.left for iv in cur])
        lens = np.array([iv.length for iv in cur])
        for pi, P in enumerate(parts):
            va, vb = (float(v) for v in cmap.lift(np.array([P.left, P.right])))
            if not (np.isfinite(va) and np.isfinite(vb)):
                raise BranchError("non-finite lift at a partition endpoint")
            inc = vb > va
            lo_v, hi_v = min(va, vb), max(va, vb)
            tl, tr, idx = [], [], []
            m_lo = np.ceil(lo_v - starts - lens).astype(int)
            m_hi = np.floor(hi_v - starts).astype(int)
            count = int(np.sum(np.maximum(m_hi - m_lo + 1, 0)))
            if count > max_intervals:
                raise CoverTooLargeError(f"level {level} would need > {max_intervals} intervals", count=count)
            for j in range(len(cur)):
                for mm in range(m_lo[j], m_hi[j] + 1):
                    l = max(starts[j] + mm, lo_v)
                    r = min(starts[j] + mm + lens[j], hi_v)
                    if r - l > 1e-15 * max(1.0, abs(r)):
                        tl.append(l)
                        tr.append(r)
                        idx.append(j)
            if not tl:
                continue
            tl, tr = np.array(tl), np.array(tr)
            xl = _invert(cmap, tl, P.left, P.right, branch_grid)
            xr = _invert(cmap, tr, P.left, P.right, branch_grid)
            xl = np.where(tl == lo_v, P.left if inc else P.right, xl)
            xr = np.where(tr == hi_v, P.right if inc else P.left, xr)
            a, b = np.minimum(xl, xr), np.maximum(xl, xr)
            for aa, bb, j in zip(a, b, idx):
                if bb > aa:
                    new_iv.append(CircleInterval(float(aa), float(bb)))
                    new_cell.append(pi)
                    new_image.append(prev_cell[j] if level > 1 else j)
                    new_parent.append(j)
            if len(new_iv) > max_intervals:
                raise CoverTooLargeError(f"level {level} exceeds {max_intervals} intervals", count=len(new_iv))
        order = np.argsort([iv.left for iv in new_iv], kind="stable")
        cur = [new_iv[i] for i in order]
        cell = np.array(new_cell)[order]
        image = np.array(new_image)[order] if level == 1 else np.array([new_image[i] for i in order])
        parent = np.array(new_parent)[order]
        prev_cell = cell
    lefts = np.array([iv.left for iv in cur])
    rights = np.array([iv.right for iv in cur])
    dmin, dmax = _sample_derivs(cmap, lefts, rights, n, derivative_samples)
    return CantorApprox(n, cur, dmin, dmax, cell, image, parent, plens, H)


def max_gap(cantor) -> float:
    """Largest distance from a circle point to the cover (half the largest complementary gap)."""
    ivs = cantor.intervals if isinstance(cantor, CantorApprox) else cantor
    if any(iv.length >= 1.0 for iv in ivs):
        return 0.0
    starts = np.array([iv.left % 1.0 for iv in ivs])
    order = np.argsort(starts)
    starts = starts[order]
    ends = starts + np.array([ivs[i].length for i in order])
    reach = np.maximum.accumulate(ends)
    gaps = np.append(starts[1:] - reach[:-1], starts[0] + 1.0 - reach[-1])
    return float(max(0.0, gaps.max()) / 2.0)


def distortion_constant(cmap, partition, level: int = 1, grid: int = 9, cantor: Optional[CantorApprox] = None) -> float:
    """max over level-n intervals of log(max |(Psi^n)'| / min |(Psi^n)'|), sampled on ``grid`` points."""
    if level < 1:
        raise ValueError("level must be >= 1")
    if cantor is None or cantor.level != level:
        cantor = refine_cantor(cmap, partition, level, derivative_samples=grid)
    elif grid != 5:
        lefts = np.array([iv.left for iv in cantor.intervals])
        rights = np.array([iv.right for iv in cantor.intervals])
        dmin, dmax = _sample_derivs(cmap, lefts, rights, level, grid)
        return float(np.max(np.log(dmax / dmin)))
    return float(np.max(np.log(cantor.deriv_max / cantor.deriv_min)))


def branch_ratio_matrix(cantor: CantorApprox) -> List[List[np.ndarray]]:
    """Level-1 contraction ratios grouped by (cell, image): r = |I| / |P_image|."""
    if cantor.level != 1:
        raise ValueError("branch ratios need a level-1 cover")
    n = len(cantor.partition_lengths)
    out = [[[] for _ in range(n)] for _ in range(n)]
    for iv, i, j in zip(cantor.intervals, cantor.cell, cantor.image):
        out[i][j].append(iv.length / cantor.partition_lengths[j])
    return [[np.array(c) for c in row] for row in out]
