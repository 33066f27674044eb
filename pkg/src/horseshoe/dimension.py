"""Bowen's equation, distortion brackets and the slight-thickness test."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import ConfigError, CoverTooLargeError, HorseshoeError
from .partition import (
    CantorApprox,
    PsiMap,
    build_proof_partition,
    distortion_constant,
    refine_cantor,
)
from .torus_map import Parameter

KAPPA_LO = 1e-6
KAPPA_HI = 1.0 - 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class BowenSolution:
    kappa: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class DimensionBracket:
    lower: float
    upper: float
    level: int
    distortion_used: float
    method: str = "explicit"

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower > upper")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class ThicknessReport:
    d_s: float
    d_u: float
    sum_ok: bool
    py_ok: bool

    @property
    def slightly_thick(self) -> bool:
        return self.sum_ok and self.py_ok


# ---------------------------------------------------------------------------
# Bowen's equation


def _bowen_terms(logs: np.ndarray, kappa: float):
    e = np.exp(kappa * logs)
    return float(e.sum()) - 1.0, float((e * logs).sum())


def bowen_solve(lengths: Sequence[float], total: float, tol: float = 1e-12) -> BowenSolution:
    """The kappa in (0, 1] with sum (l_i / L)^kappa = 1.

    Bisection on (1e-6, 1 - 1e-12) narrows the root, then a safeguarded Newton
    step polishes it.  When the lengths exactly fill the total the answer is 1.
    """
    l = np.asarray(lengths, dtype=float)
    if l.size == 0 or total <= 0 or np.any(l <= 0):
        raise ConfigError("lengths and total must be positive")
    if np.any(l >= total):
        raise ConfigError("each length must be shorter than the total")
    logs = np.log(l) - math.log(total)
    f1, _ = _bowen_terms(logs, 1.0)
    if abs(f1) <= tol:
        return BowenSolution(1.0, abs(f1), 0)
    if f1 > 0:
        raise ConfigError("sum of lengths exceeds the total: no root in (0, 1]")
    lo, hi = KAPPA_LO, KAPPA_HI
    if _bowen_terms(logs, lo)[0] <= 0:
        raise ConfigError("root below 1e-6")
    it = 0
    while hi - lo > 1e-4 and it < MAX_ITER:
        mid = 0.5 * (lo + hi)
        if _bowen_terms(logs, mid)[0] > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    x = 0.5 * (lo + hi)
    while it < MAX_ITER:
        f, d = _bowen_terms(logs, x)
        it += 1
        if abs(f) <= tol:
            break
        if f > 0:
            lo = x
        else:
            hi = x
        xn = x - f / d if d != 0 else 0.5 * (lo + hi)
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
    return BowenSolution(float(x), abs(_bowen_terms(logs, x)[0]), it)


def _kappa_or_one(lengths, total):
    l = np.asarray(lengths, float)
    if np.any(l >= total) or l.sum() >= total:
        return 1.0
    return bowen_solve(l, total).kappa


def dimension_bracket(cantor, distortion: float, total: Optional[float] = None) -> DimensionBracket:
    """Distortion sandwich: Bowen roots for the lengths scaled by e^{-delta} and e^{+delta}.

    ``cantor`` is a CantorApprox (hull length used as total) or a plain length list.
    The upper end is capped at 1 when the inflated lengths fill the total.
    """
    if isinstance(cantor, CantorApprox):
        lengths, level = cantor.lengths, cantor.level
        if total is None:
            total = cantor.hull_length
    else:
        lengths, level = np.asarray(cantor, float), 0
        if total is None:
            raise ConfigError("total length required for a bare length list")
    if distortion < 0:
        raise ConfigError("distortion must be >= 0")
    lower = _kappa_or_one(lengths * math.exp(-distortion), total)
    upper = _kappa_or_one(lengths * math.exp(distortion), total)
    return DimensionBracket(lower, upper, level, distortion)


def transfer_matrix(cantor: CantorApprox, kappa: float) -> np.ndarray:
    """M_ij(kappa) = sum of r^kappa over level-1 branches from P_i onto P_j, r = |I| / |P_j|."""
    if cantor.level != 1:
        raise ValueError("transfer matrix needs a level-1 cover")
    n = len(cantor.partition_lengths)
    M = np.zeros((n, n))
    r = cantor.lengths / cantor.partition_lengths[cantor.image]
    np.add.at(M, (cantor.cell, cantor.image), r**kappa)
    return M


def matrix_sum(cantor: CantorApprox, kappa: float, level: int) -> float:
    """Approximate sum over level-n intervals of |I|^kappa: 1^T M^level (|P|^kappa)."""
    v = cantor.partition_lengths**kappa
    if level == 0:
        return float(v.sum())
    M = transfer_matrix(cantor, kappa)
    return float(np.ones(len(v)) @ np.linalg.matrix_power(M, level) @ v)


def matrix_bracket(cantor1: CantorApprox, level: int, distortion: float) -> DimensionBracket:
    """Bracket at deep levels from level-1 branch ratios (products of ratios stand in for lengths)."""
    L = cantor1.hull_length

    def root(scale):
        def F(kappa):
            return math.log(matrix_sum(cantor1, kappa, level)) + kappa * (scale - math.log(L))

        if F(KAPPA_HI) >= 0:
            return 1.0
        lo, hi = KAPPA_LO, KAPPA_HI
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if F(mid) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return DimensionBracket(root(-distortion), root(distortion), level, distortion, "transfer-matrix")


# ---------------------------------------------------------------------------
# thickness


def _lt(a: float, b: float, a_exact, b_exact) -> bool:
    # exact rational comparison when the float test is too close to call
    if abs(a - b) > 1e-12 * max(1.0, abs(a), abs(b)):
        return a < b
    return a_exact() < b_exact()


def slight_thickness(d_s: float, d_u: float) -> ThicknessReport:
    """d_s + d_u > 1 and (d_s + d_u)^2 + max(d_s, d_u)^2 < d_s + d_u + max(d_s, d_u)."""
    for d in (d_s, d_u):
        if not 0.0 < d < 1.0:
            raise ConfigError(f"dimension {d} outside (0, 1)")
    s, m = d_s + d_u, max(d_s, d_u)
    # boundary cases are settled on the shortest decimal form of the inputs
    fs, fu = Fraction(repr(float(d_s))), Fraction(repr(float(d_u)))
    fsum, fm = fs + fu, max(fs, fu)
    sum_ok = _lt(1.0, s, lambda: Fraction(1), lambda: fsum)
    py_ok = _lt(s * s + m * m, s + m, lambda: fsum * fsum + fm * fm, lambda: fsum + fm)
    return ThicknessReport(d_s, d_u, bool(sum_ok), bool(py_ok))


# ---------------------------------------------------------------------------
# end-to-end check


@dataclass
class WindowReport:
    k: float
    level: int
    cases: Dict[str, dict] = field(default_factory=dict)
    passed: bool = False

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "level": self.level, "pass": self.passed, "cases": self.cases}, indent=2, sort_keys=True)

    def summary(self) -> str:
        parts = []
        for name, c in self.cases.items():
            if "error" in c:
                parts.append(f"{name}: error at {c['stage']}")
            else:
                parts.append(f"{name}: [{c['lower']:.4f}, {c['upper']:.4f}] {'pass' if c['pass'] else 'fail'}")
        return f"k={self.k:g} level={self.level}: " + "; ".join(parts)


TARGET = (0.5, 0.6)
REFERENCE_WINDOW = (0.554, 0.581)


def _case_report(bracket: DimensionBracket, level0: float, extra: dict) -> dict:
    lo_t = slight_thickness(bracket.lower, bracket.lower) if 0 < bracket.lower < 1 else None
    up_t = slight_thickness(bracket.upper, bracket.upper) if 0 < bracket.upper < 1 else None
    inside = TARGET[0] < bracket.lower and bracket.upper < TARGET[1]
    meets = bracket.lower < REFERENCE_WINDOW[1] and bracket.upper > REFERENCE_WINDOW[0]
    out = {
        "lower": bracket.lower,
        "upper": bracket.upper,
        "width": bracket.width,
        "method": bracket.method,
        "distortion": bracket.distortion_used,
        "partition_bowen": level0,
        "thick_lower": bool(lo_t and lo_t.slightly_thick),
        "thick_upper": bool(up_t and up_t.slightly_thick),
        "inside_target": inside,
        "meets_window": meets,
        "pass": inside and meets,
    }
    out.update(extra)
    return out


def verify_dimension_window(param: Parameter, level: int = 3, cases: Sequence[str] = ("former", "latter"), max_explicit: int = 200_000, override: bool = False) -> WindowReport:
    """Partition -> cover -> distortion -> bracket -> thickness, for each case.

    Levels whose explicit cover would exceed ``max_explicit`` intervals use the
    transfer-matrix extension of the level-1 branch ratios.
    """
    rep = WindowReport(param.k, level)
    for case in cases:
        try:
            part = build_proof_partition(param, case, override=override)
            cmap = PsiMap(param)
            lens = list(part.lengths().values())
            L = part.hull.length
            level0 = bowen_solve(lens, L).kappa
            if level == 0:
                cover1 = refine_cantor(cmap, part, 1)
                delta = distortion_constant(cmap, part, 1, cantor=cover1)
                br = dimension_bracket(lens, delta, L)
                br = DimensionBracket(br.lower, br.upper, 0, delta)
            else:
                cover1 = refine_cantor(cmap, part, 1, max_intervals=max_explicit)
                delta = distortion_constant(cmap, part, 1, cantor=cover1)
                try:
                    cover = cover1 if level == 1 else refine_cantor(cmap, part, level, max_intervals=max_explicit)
                    br = dimension_bracket(cover, delta)
                except CoverTooLargeError:
                    br = matrix_bracket(cover1, level, delta)
            rep.cases[case] = _case_report(br, level0, {"hull": L, "lengths": lens, "level1_count": len(cover1.intervals)})
        except HorseshoeError as exc:
            rep.cases[case] = {"error": str(exc), "stage": exc.stage, "pass": False}
    rep.passed = all(c.get("pass", False) for c in rep.cases.values())
    return rep


def synthetic_window(lengths: Sequence[float], total: float, distortion: float = 0.0) -> dict:
    """The end-to-end report for an injected partition (level 0, no map)."""
    br = dimension_bracket(lengths, distortion, total)
    return _case_report(br, bowen_solve(lengths, total).kappa, {"hull": total, "lengths": list(lengths)})
