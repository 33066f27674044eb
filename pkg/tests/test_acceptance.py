"""The thirteen acceptance criteria, each at its stated tolerance and time budget.

Every test records a PASS/FAIL line (see conftest) before asserting, so the
summary lists all criteria even when some fail.
"""

import math
import time

import numpy as np
import pytest

from horseshoe import dimension, foliation, partition, tangency, torus_map
from horseshoe.torus_map import Parameter, TorusPoint


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def test_criterion_01_bowen_oracle(report):
    a, ta = _timed(dimension.bowen_solve, (1 / 16, 1 / 8, 1 / 8), 65 / 96)
    b, tb = _timed(dimension.bowen_solve, (1 / 16, 1 / 8, 1 / 8), 71 / 96)
    ok = abs(a.kappa - 0.5809) <= 5e-4 and abs(b.kappa - 0.5546) <= 5e-4 and max(ta, tb) < 1e-3
    report(1, ok, f"kappa(65/96)={a.kappa:.6f} kappa(71/96)={b.kappa:.6f} time={max(ta, tb) * 1e3:.3f} ms")
    assert ok


def test_criterion_02_slight_thickness_window(report):
    t = time.perf_counter()
    mismatches = []
    for i in range(201):
        d = round(0.45 + 0.001 * i, 3)
        expected = 0.5 < d < 0.6
        if dimension.slight_thickness(d, d).slightly_thick != expected:
            mismatches.append(d)
    elapsed = (time.perf_counter() - t) / 201
    ok = not mismatches and elapsed < 1e-3
    report(2, ok, f"201 values, mismatches={mismatches} time/call={elapsed * 1e6:.1f} us")
    assert ok


def test_criterion_03_map_algebra(report):
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    x, y = rng.random(10_000), rng.random(10_000)
    worst = {"roundtrip": 0.0, "det": 0.0, "reversible": 0.0}
    for k in (1.0, 5.0, 100.0):
        u, v = torus_map.forward_arrays(k, x, y)
        bx, by = torus_map.inverse_arrays(k, u, v)
        worst["roundtrip"] = max(worst["roundtrip"], float(np.max(torus_map.circle_distance(bx, x))), float(np.max(torus_map.circle_distance(by, y))))
        par = Parameter(k)
        det = np.array([torus_map.jacobian(par, TorusPoint(a, b)).det for a, b in zip(x, y)])
        worst["det"] = max(worst["det"], float(np.max(np.abs(det - 1.0))))
        # f^{-1} = S f S with S(x, y) = (y, x)
        sx, sy = torus_map.forward_arrays(k, v, u)
        worst["reversible"] = max(worst["reversible"], float(np.max(torus_map.circle_distance(sy, bx))), float(np.max(torus_map.circle_distance(sx, by))))
    elapsed = time.perf_counter() - t
    ok = worst["roundtrip"] <= 1e-12 and worst["det"] <= 1e-14 and worst["reversible"] <= 1e-12 and elapsed < 1
    report(3, ok, f"roundtrip={worst['roundtrip']:.1e} det={worst['det']:.1e} reversible={worst['reversible']:.1e} time={elapsed:.2f} s")
    assert ok


def test_criterion_04_fixed_points(report):
    recs, elapsed = _timed(torus_map.fixed_points, Parameter(100))
    ps = torus_map.find_fixed_point(Parameter(100), 0.0)
    pu = torus_map.find_fixed_point(Parameter(100), 11 / 12)
    err_s = ps.point.distance(TorusPoint(0, 0))
    err_u = pu.point.distance(TorusPoint(11 / 12, 11 / 12))
    ok = max(err_s, err_u) < 1e-10 and max(ps.residual, pu.residual) < 1e-10 and elapsed < 1
    report(4, ok, f"|p_s-(0,0)|={err_s:.1e} |p_u-(11/12,11/12)|={err_u:.1e} count={len(recs)} time={elapsed:.3f} s")
    assert ok


def test_criterion_05_critical_asymptotics(report):
    c, elapsed = _timed(torus_map.critical_points, Parameter(400))
    ratio = (c.nu_plus - 0.25) * 2 * math.pi**2 * 400
    ok = 0.99 <= ratio <= 1.01 and elapsed < 1
    report(5, ok, f"(nu_+ - 1/4) 2 pi^2 k = {ratio:.6f} time={elapsed * 1e3:.2f} ms")
    assert ok


def test_criterion_06_foliation(report):
    t = time.perf_counter()
    p5 = Parameter(5, 0)
    s = foliation.stable_slope(p5, TorusPoint(0, 0), 60)
    lam = torus_map.jacobian(p5, TorusPoint(0, 0)).eigenvalues()[1]
    # the eigenvector (lambda_s, 1) of [[a, -1], [1, 0]]
    eig_err = abs(s.slope - lam)
    p = Parameter(100)
    rho = torus_map.default_rho(p)
    rng = np.random.default_rng(6)
    x, y = rng.random(4000), rng.random(4000)
    a_s, e_s, v_s = foliation.stable_slopes(p, x, y, 40, rho)
    a_u, e_u, v_u = foliation.unstable_slopes(p, y, x, 40, rho)
    m = np.flatnonzero(v_s & v_u)[:1000]
    sym_ok = len(m) == 1000 and bool(np.all(np.abs(a_s[m] - a_u[m]) <= e_s[m] + e_u[m] + 1e-15))
    elapsed = time.perf_counter() - t
    ok = eig_err <= 1e-10 and sym_ok and elapsed < 10
    report(6, ok, f"eigvec err={eig_err:.1e}; symmetry on {len(m)} valid samples {'ok' if sym_ok else 'violated'}; time={elapsed:.2f} s")
    assert ok


KS = (50.0, 100.0, 200.0, 400.0)


@pytest.fixture(scope="module")
def circles():
    t = time.perf_counter()
    out = {k: tangency.tangency_circle(Parameter(k), "+") for k in KS}
    return out, time.perf_counter() - t


def test_criterion_07_tangency_circle(report, circles):
    out, elapsed = circles
    c200 = out[200.0]
    abs_ok = c200.bound_checks["amplitude_ok"] and c200.bound_checks["slope_ok"]
    passing = [k for k in KS if out[k].bound_checks["amplitude_ok"] and out[k].bound_checks["slope_ok"]]
    e_amp = tangency.scaling_exponent(KS, [out[k].amplitude for k in KS])
    e_slope = tangency.scaling_exponent(KS, [out[k].max_slope for k in KS])
    exp_ok = abs(e_amp + 5 / 3) <= 0.2 and abs(e_slope + 4 / 3) <= 0.2
    ok = abs_ok and exp_ok and elapsed < 120
    report(7, ok, f"k=200 amp={c200.amplitude:.2e} slope={c200.max_slope:.2e} bounds {'pass' if abs_ok else 'fail'} "
           f"(smallest passing k: {min(passing) if passing else None}); exponents {e_amp:.2f} (-5/3), {e_slope:.2f} (-4/3); time={elapsed:.0f} s")
    assert ok


def test_criterion_08_unfolding_speeds(report):
    (s, g), elapsed = _timed(tangency.unfolding_speed, Parameter(100))
    bound = 3 / 100 ** (2 / 3)
    ok = abs(s) <= bound and g >= 1 - bound and elapsed < 60
    report(8, ok, f"speed_s={s:.2e} speed_Gu={g:.6f} bound={bound:.4f} time={elapsed:.1f} s")
    assert ok


def test_criterion_09_heteroclinic_tangency(report):
    ev, elapsed = _timed(tangency.find_heteroclinic_tangency, Parameter(100))
    window = 4 / 100 ** (1 / 3)
    ok = abs(ev.r - 100) < window and ev.residual < 1e-9 and elapsed < 300
    report(9, ok, f"r={ev.r:.6f} (window {window:.3f}) residual={ev.residual:.1e} time={elapsed:.1f} s")
    assert ok


def test_criterion_10_markov_partitions(report):
    t = time.perf_counter()
    duarte = partition.build_duarte_partition(Parameter(200))
    d_ok = all(duarte.window_ok.values()) and duarte.max_residual() < 1e-9
    bound = 2 / 200 ** (1 / 3)
    details, p_ok = [], True
    for case in ("former", "latter"):
        part = partition.build_proof_partition(Parameter(200), case)
        devs = [part.extras[f"length_deviation_{n}"] for n in ("I-", "I0", "I1")]
        good = all(part.window_ok.values()) and part.max_residual() < 1e-9 and max(devs) <= bound
        p_ok &= good
        details.append(f"{case} maxdev={max(devs):.1e} res={part.max_residual():.1e}")
    elapsed = time.perf_counter() - t
    ok = d_ok and p_ok and elapsed < 60
    report(10, ok, f"duarte windows {'ok' if d_ok else 'fail'} res={duarte.max_residual():.1e}; proof {', '.join(details)} (bound {bound:.3f}); time={elapsed:.1f} s")
    assert ok


def test_criterion_11_distortion(report):
    t = time.perf_counter()
    c1 = {}
    for k in (100.0, 200.0, 400.0):
        p = Parameter(k)
        part = partition.build_proof_partition(p, "former")
        c1[k] = partition.distortion_constant(partition.PsiMap(p), part, 1)
    elapsed = time.perf_counter() - t
    bound = 9 / 200 ** (1 / 3)
    ok = c1[200.0] <= bound and c1[100.0] > c1[200.0] > c1[400.0] and elapsed < 60
    report(11, ok, f"C1 = {', '.join(f'{v:.4f}@{k:g}' for k, v in c1.items())} bound={bound:.3f} time={elapsed:.1f} s")
    assert ok


def test_criterion_12_dimension_window(report):
    rep, elapsed = _timed(dimension.verify_dimension_window, Parameter(1000), 3)
    widths_ok = all(c.get("width", 1.0) <= 0.03 for c in rep.cases.values())
    ok = rep.passed and widths_ok and elapsed < 600
    report(12, ok, f"{rep.summary()} time={elapsed:.0f} s")
    assert ok


def test_criterion_13_middle_thirds_oracle(report):
    t = time.perf_counter()
    cmap = partition.AffineCircleMap(3.0)
    part = partition.synthetic_partition({"L": (0.0, 1 / 3), "R": (2 / 3, 1.0)})
    target = math.log(2) / math.log(3)
    geom_ok = True
    for n in range(0, 7):
        c = partition.refine_cantor(cmap, part, n)
        # level n: 2^(n+1) intervals of length 3^-(n+1); the widest gap is the middle third
        lefts = sorted(iv.left for iv in c.intervals)
        geom_ok &= len(c.intervals) == 2 ** (n + 1)
        geom_ok &= bool(np.allclose(c.lengths, 3.0 ** -(n + 1), rtol=0, atol=1e-15))
        geom_ok &= partition.max_gap(c) == pytest.approx(1 / 6, abs=1e-15)
        geom_ok &= lefts[1] == pytest.approx(2 * 3.0 ** -(n + 1), abs=1e-15) if n > 0 else True
    br = dimension.dimension_bracket(partition.refine_cantor(cmap, part, 6), 0.0)
    err = max(abs(br.lower - target), abs(br.upper - target))
    elapsed = time.perf_counter() - t
    ok = geom_ok and err <= 1e-3 and elapsed < 60
    report(13, ok, f"level-6 bracket error={err:.1e}; geometry {'exact' if geom_ok else 'mismatch'}; time={elapsed:.2f} s")
    assert ok
