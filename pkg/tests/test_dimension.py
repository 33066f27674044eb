import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horseshoe import dimension as D
from horseshoe import partition as P
from horseshoe.errors import ConfigError

LOG2_LOG3 = math.log(2) / math.log(3)


def test_bowen_frozen_roots():
    assert D.bowen_solve((1 / 16, 1 / 8, 1 / 8), 65 / 96).kappa == pytest.approx(0.58096155, abs=1e-8)
    assert D.bowen_solve((1 / 16, 1 / 8, 1 / 8), 71 / 96).kappa == pytest.approx(0.55469178, abs=1e-8)


def test_bowen_middle_thirds():
    assert D.bowen_solve((1 / 3, 1 / 3), 1.0).kappa == pytest.approx(LOG2_LOG3, abs=1e-12)


def test_bowen_full_cover_is_one():
    sol = D.bowen_solve((0.5, 0.5), 1.0)
    assert sol.kappa == 1.0 and sol.iterations == 0


@pytest.mark.parametrize("lengths,total", [((), 1.0), ((0.1, -0.1), 1.0), ((0.6, 0.6), 1.0), ((1.0,), 1.0)])
def test_bowen_rejects_bad_input(lengths, total):
    with pytest.raises(ConfigError):
        D.bowen_solve(lengths, total)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 0.3), min_size=2, max_size=6))
def test_bowen_residual_small(lengths):
    total = 1.05 * sum(lengths) + 0.31
    sol = D.bowen_solve(lengths, total)
    assert 0 < sol.kappa < 1
    assert sum((l / total) ** sol.kappa for l in lengths) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.5))
def test_bracket_contains_undistorted_root(delta):
    lengths, total = (1 / 16, 1 / 8, 1 / 8), 65 / 96
    br = D.dimension_bracket(lengths, delta, total)
    assert br.lower <= 0.5809615535114939 + 1e-12 <= br.upper + 2e-12


def test_bracket_caps_at_one():
    br = D.dimension_bracket((0.3, 0.3), 0.7, 1.0)
    assert br.upper == 1.0


def test_matrix_sum_matches_explicit_cover():
    cmap = P.AffineCircleMap(5.0)
    part = P.synthetic_partition({"A": (0.0, 0.2), "B": (0.4, 0.6), "C": (0.8, 1.0)})
    c1 = P.refine_cantor(cmap, part, 1)
    c3 = P.refine_cantor(cmap, part, 3)
    for kappa in (0.3, 0.7):
        assert D.matrix_sum(c1, kappa, 3) == pytest.approx(float(np.sum(c3.lengths**kappa)), rel=1e-12)
    br = D.matrix_bracket(c1, 5, 0.0)
    assert br.midpoint == pytest.approx(math.log(3) / math.log(5), abs=1e-10)
    assert br.method == "transfer-matrix"


@pytest.mark.parametrize("d,thick", [(0.45, False), (0.5, False), (0.501, True), (0.55, True), (0.599, True), (0.6, False), (0.65, False)])
def test_slight_thickness_diagonal(d, thick):
    assert D.slight_thickness(d, d).slightly_thick is thick


def test_slight_thickness_asymmetric():
    r = D.slight_thickness(0.45, 0.6)
    assert r.sum_ok and r.py_ok
    assert not D.slight_thickness(0.3, 0.6).sum_ok


def test_slight_thickness_domain():
    with pytest.raises(ConfigError):
        D.slight_thickness(1.0, 0.5)


def test_synthetic_window_reports_inside():
    rep = D.synthetic_window((1 / 16, 1 / 8, 1 / 8), 65 / 96, 0.0)
    assert rep["pass"] and rep["thick_lower"]
    assert rep["lower"] == pytest.approx(0.58096155, abs=1e-8)
    rep = D.synthetic_window((1 / 3, 1 / 3), 1.0)
    assert not rep["inside_target"]
