import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horseshoe import partition as P
from horseshoe.errors import BranchError, CoverTooLargeError
from horseshoe.partition import AffineCircleMap, CircleInterval
from horseshoe.torus_map import Parameter, signed_diff

MIDDLE_THIRDS = {"L": (0.0, 1 / 3), "R": (2 / 3, 1.0)}


@pytest.fixture(scope="module")
def former200():
    return P.build_proof_partition(Parameter(200), "former")


def test_circle_interval_basics():
    iv = CircleInterval(0.9, 1.2)
    assert iv.length == pytest.approx(0.3)
    assert iv.contains(0.05)
    assert not iv.contains(0.5)
    assert iv.contains_interval(CircleInterval(0.95, 1.1))
    assert iv.overlaps(CircleInterval(0.1, 0.4))
    assert not iv.overlaps(CircleInterval(0.3, 0.8))


def test_hull_is_ordered_span():
    h = P.hull([CircleInterval(-0.1, 0.0), CircleInterval(0.1, 0.2), CircleInterval(0.5, 0.6)])
    assert h.as_tuple() == (-0.1, 0.6)


@given(st.floats(-5, 5), st.floats(0.01, 0.9))
def test_interval_midpoint_inside(left, width):
    iv = CircleInterval(left, left + width)
    assert iv.contains(iv.midpoint)


def test_solve_in_window_picks_nearest_root():
    # roots of sin(2 pi 8 x) in (0, 1/2): multiples of 1/16
    fn = lambda x: np.sin(16 * math.pi * np.asarray(x))
    x, _, alts = P.solve_in_window(fn, 0.01, 0.49, 0.2)
    assert x == pytest.approx(3 / 16, abs=1e-13)
    # only the three roots nearest the nominal value are refined
    assert sorted(alts) == pytest.approx([1 / 8, 1 / 4], abs=1e-13)


def test_psi_frozen_and_correction_bounded():
    p = Parameter(200)
    m = P.PsiMap(p)
    x = np.array([0.05, 0.4, 0.7])
    assert m.lift(x) == pytest.approx([61.65301857, 148.86979218, -349.87648649], abs=1e-7)
    r = P.psi_report(p, 0.4)
    assert r["displacement"] == pytest.approx(9.272653457514934e-05, rel=1e-6)
    assert r["displacement"] <= r["bound"]


def test_psi_derivative_matches_difference():
    m = P.PsiMap(Parameter(200))
    x = np.array([0.05, 0.6])
    # the leaf correction oscillates with period ~1/|Psi'| in x, so the
    # reference difference needs a step far below that scale
    h = 1e-8
    num = (m.lift(x + h) - m.lift(x - h)) / (2 * h)
    assert np.allclose(m.deriv(x), num, rtol=1e-5)
    assert m.deriv(np.array([0.6]))[0] == pytest.approx(-2268.444, abs=1e-2)


def test_proof_partition_former_frozen(former200):
    e = former200.endpoints
    assert e["s0"] == pytest.approx(0.0001988289823151579, abs=1e-10)
    assert e["u0"] == pytest.approx(-0.08316849022134261, abs=1e-10)
    assert e["a"] == pytest.approx(0.12551761619379787, abs=1e-9)
    assert e["b"] == pytest.approx(0.46802750390897974, abs=1e-9)
    assert e["c"] == pytest.approx(0.5940303645634871, abs=1e-9)
    assert e["d"] == pytest.approx(-0.020039197624735054, abs=1e-9)
    assert all(former200.window_ok.values())
    assert former200.max_residual() < 1e-9
    assert former200.disjoint()
    assert former200.hull.length == pytest.approx(0.6771988547848298, abs=1e-8)


def test_proof_partition_markov_property(former200):
    # Psi maps each endpoint of the boundary chain onto its target
    m = P.PsiMap(Parameter(200))
    ends = former200.endpoints
    for name, target in former200.boundary_spec:
        assert abs(float(signed_diff(m.lift(ends[name])[0], ends[target]))) < 1e-9


def test_partition_json_roundtrip(former200):
    import json

    d = json.loads(former200.to_json())
    assert d["case"] == "proof_former"
    assert set(d["intervals"]) == {"I-", "I0", "I1"}


def test_middle_thirds_cover_exact():
    cmap, part = AffineCircleMap(3.0), P.synthetic_partition(MIDDLE_THIRDS)
    c = P.refine_cantor(cmap, part, 2)
    lefts = sorted(round(iv.left * 27) for iv in c.intervals)
    assert lefts == [0, 2, 6, 8, 18, 20, 24, 26]
    assert np.allclose(c.lengths, 1 / 27, atol=1e-15)
    assert P.max_gap(c) == pytest.approx(1 / 6)
    assert c.hull_length == 1.0


def test_fifths_cover_and_distortion():
    cmap = AffineCircleMap(5.0)
    part = P.synthetic_partition({"A": (0.0, 0.2), "B": (0.4, 0.6), "C": (0.8, 1.0)})
    c = P.refine_cantor(cmap, part, 3)
    assert len(c.intervals) == 3**4
    assert P.distortion_constant(cmap, part, 2) == 0.0
    # the gap of width 1/5 between A and B sets the density
    assert P.max_gap(c) == pytest.approx(0.1)


def test_cover_limit_raises():
    with pytest.raises(CoverTooLargeError):
        P.refine_cantor(AffineCircleMap(3.0), P.synthetic_partition(MIDDLE_THIRDS), 8, max_intervals=100)


def test_pole_inside_partition_rejected():
    cmap = AffineCircleMap(3.0)
    cmap.poles = (0.1,)
    with pytest.raises(BranchError):
        P.refine_cantor(cmap, P.synthetic_partition(MIDDLE_THIRDS), 1)


def test_branch_ratio_matrix_shape():
    c = P.refine_cantor(AffineCircleMap(3.0), P.synthetic_partition(MIDDLE_THIRDS), 1)
    m = P.branch_ratio_matrix(c)
    assert len(m) == 2 and len(m[0]) == 2
    assert np.allclose(np.concatenate([r for row in m for r in row]), 1 / 3)
