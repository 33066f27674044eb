"""Command-line interface: one subcommand per pipeline stage.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures (the message names the failing stage).  Output is JSON by default;
commands that produce tables also accept ``--format csv``.

Environment overrides: HORSESHOE_TOL (default tolerance) and
HORSESHOE_K_MIN_GUARD (smallest |k| accepted without --override).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from . import dimension, foliation, partition, tangency, torus_map
from .errors import ConfigError, HorseshoeError
from .serialization import dumps, rows_to_csv
from .torus_map import Parameter, TorusPoint

DEFAULT_TOL = float(os.environ.get("HORSESHOE_TOL", "1e-9"))


# ---------------------------------------------------------------------------
# argument helpers


def rational(text: str) -> float:
    """Parse '1/16', '0.25' or '3' exactly, then convert to float."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def rational_list(text: str) -> List[float]:
    return [rational(t) for t in text.split(",") if t.strip()]


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _tolerance(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1e-3:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1e-3]")
    return v


def _param(args) -> Parameter:
    if args.k is None:
        raise ConfigError("--k is required for this command")
    guard = args.k_min_guard if args.k_min_guard is not None else torus_map.DEFAULT_K_MIN_GUARD
    p = Parameter(args.k, guard)
    return p


def _partition(args, p: Parameter):
    kind = getattr(args, "partition", "proof")
    if kind == "duarte":
        return partition.build_duarte_partition(p, override=args.override)
    case = args.case
    if case == "auto":
        # prefer the former case; fall back when its windows cannot be met
        try:
            return partition.build_proof_partition(p, "former", override=args.override)
        except HorseshoeError:
            return partition.build_proof_partition(p, "latter", override=args.override)
    return partition.build_proof_partition(p, case, override=args.override)


# ---------------------------------------------------------------------------
# commands; each returns (json payload, csv text or None)


def cmd_fixed_points(args):
    p = _param(args)
    recs = torus_map.fixed_points(p)
    rows = [(r.point.x, r.point.y, r.branch_integer, r.stability, r.residual) for r in recs]
    payload = {"k": p.k, "fixed_points": [{"x": r.point.x, "y": r.point.y, "branch": r.branch_integer, "stability": r.stability, "eigenvalues": r.eigenvalues, "residual": r.residual} for r in recs]}
    return payload, rows_to_csv(["x", "y", "branch", "stability", "residual"], rows)


def cmd_critical(args):
    p = _param(args)
    c = torus_map.critical_points(p)
    return {"k": p.k, **{f: getattr(c, f) for f in ("nu_plus", "nu_minus", "strip_halfwidth", "residual", "asymptotic_constant")}}, None


def cmd_foliation_sample(args):
    p = _param(args)
    rho = torus_map.default_rho(p) if args.perturbed else None
    pt = TorusPoint(args.x, args.y)
    fn = {"s": foliation.stable_slope, "u": foliation.unstable_slope, "G": foliation.pushforward_unstable_slope}[args.kind]
    s = fn(p, pt, args.depth, rho)
    return {"k": p.k, "x": pt.x, "y": pt.y, "kind": args.kind, "perturbed": args.perturbed, "slope": s.slope, "depth": s.depth, "est_error": s.est_error, "valid": s.valid}, None


def cmd_leaf(args):
    p = _param(args)
    rho = torus_map.default_rho(p) if args.perturbed else None
    tr = foliation.leaf_trace(p, TorusPoint(args.x, args.y), args.which, args.span, args.step, args.depth, rho)
    return {"k": p.k, "which": tr.which, "step": tr.step, "xs": tr.xs, "ys": tr.ys}, tr.to_csv()


def cmd_tangency_circle(args):
    p = _param(args)
    c = tangency.tangency_circle(p, args.sign, args.grid, args.depth, override=args.override)
    payload = {"k": p.k, "sign": c.sign, "nu": c.nu, "samples": len(c.xs), "failed": c.failed, "amplitude": c.amplitude, "max_slope": c.max_slope, "max_residual": float(np.max(c.residuals)), **c.bound_checks}
    return payload, c.to_csv()


def cmd_curvature(args):
    p = _param(args)
    y = float(tangency.sigma_values(p, np.array([args.x]), "+", args.depth)[0][0])
    q = TorusPoint(args.x, y)
    gap, err = tangency.curvature_gap_with_error(p, q, args.depth, args.h)
    return {"k": p.k, "x": q.x, "y": q.y, "curvature_gap": gap, "error": err, "reference_4pi2k": 4 * np.pi**2 * p.k}, None


def cmd_speeds(args):
    p = _param(args)
    s, g = tangency.unfolding_speed(p, args.dk, args.iterates, args.depth)
    bound = 3.0 / p.cube_root**2
    return {"k": p.k, "dk": args.dk, "speed_s": s, "speed_Gu": g, "speed_s_bound": bound, "speed_s_ok": s <= bound, "speed_Gu_ok": g >= 1 - bound}, None


def cmd_find_tangency(args):
    p = _param(args)
    ev = tangency.find_heteroclinic_tangency(p, args.iterates, args.depth, args.scan_resolution, override=args.override)
    return {"k": ev.k, "r": ev.r, "offset_residual": ev.residual, "q": [ev.q.x, ev.q.y], "curvature_gap": ev.curvature_gap, "speed_s": ev.speed_s, "speed_Gu": ev.speed_Gu, "matched": ev.matched, "window": 4.0 / p.cube_root}, None


def cmd_partition(args):
    p = _param(args)
    args.partition = args.kind
    part = _partition(args, p)
    d = part.to_dict()
    d["disjoint"] = part.disjoint()
    d["max_residual"] = part.max_residual()
    return d, None


def _cover(args):
    p = _param(args)
    part = _partition(args, p)
    cmap = partition.PsiMap(p)
    return p, part, cmap, partition.refine_cantor(cmap, part, args.level, args.grid)


def cmd_cantor(args):
    p, part, _, c = _cover(args)
    d = c.to_dict()
    d.update({"k": p.k, "case": part.case_tag})
    return d, c.to_csv()


def cmd_max_gap(args):
    p, part, _, c = _cover(args)
    g = partition.max_gap(c)
    d = 1.0 / p.cube_root
    return {"k": p.k, "case": part.case_tag, "level": c.level, "max_gap": g, "two_over_cube_root": 2 * d, "four_over_cube_root": 4 * d}, None


def cmd_distortion(args):
    if args.level < 1:
        raise ConfigError("distortion needs --level >= 1")
    p, part, cmap, c = _cover(args)
    c1 = partition.distortion_constant(cmap, part, args.level, cantor=c)
    bound = 9.0 / p.cube_root
    return {"k": p.k, "case": part.case_tag, "level": args.level, "distortion": c1, "bound": bound, "ok": c1 <= bound}, None


def cmd_bowen(args):
    sol = dimension.bowen_solve(args.lengths, args.total)
    return {"lengths": args.lengths, "total": args.total, "kappa": sol.kappa, "residual": sol.residual, "iterations": sol.iterations}, None


def cmd_verify(args):
    p = _param(args)
    cases = ("former", "latter") if args.case == "auto" else (args.case,)
    rep = dimension.verify_dimension_window(p, args.level, cases, override=args.override)
    payload = {"k": rep.k, "level": rep.level, "pass": rep.passed, "cases": rep.cases, "summary": rep.summary()}
    if args.strict and not rep.passed:
        args._exit = 1
    return payload, None


def cmd_portrait(args):
    p = _param(args)
    rng = np.random.default_rng(args.seed)
    x, y = rng.random(args.orbits), rng.random(args.orbits)
    rows = []
    for i in range(args.iterations + 1):
        rows.extend((j, i, float(x[j]), float(y[j])) for j in range(args.orbits))
        x, y = torus_map.forward_arrays(p.k, x, y)
    payload = {"k": p.k, "orbits": args.orbits, "iterations": args.iterations, "seed": args.seed, "points": len(rows)}
    return payload, rows_to_csv(["orbit", "step", "x", "y"], rows)


# ---------------------------------------------------------------------------
# parser


HELP = {
    "fixed-points": "all fixed points of f_k (the saddles p_s and p_u among them)",
    "critical": "critical points nu_+- of the first coordinate and the strip width",
    "foliation-sample": "stable, unstable or pushed-forward slope at a point (continued fractions)",
    "leaf": "polyline of a stable, unstable or G^u leaf through a point",
    "tangency-circle": "the tangency circle sigma_+ or sigma_- with amplitude and slope bounds",
    "curvature": "curvature gap between F^s and G^u at the sigma_+ point above x",
    "speeds": "parameter speeds of the F^s(p_s) and G^u footprints on sigma_+",
    "find-tangency": "parameter search for a heteroclinic tangency between W^s(p_s) and W^u(p_u)",
    "partition": "Markov partition of the singular circle map (duarte or proof)",
    "cantor": "level-n Cantor cover from preimages of the partition",
    "max-gap": "density of the Cantor cover (half the largest gap)",
    "distortion": "distortion constant of the circle map along level-n branches",
    "bowen": "root of Bowen's equation for given lengths and total",
    "verify": "end-to-end dimension window: partition, cover, distortion, bracket, thickness",
    "portrait": "orbit scatter of f_k as CSV for phase-portrait figures",
    "sweep": "repeat a subcommand over several k values",
}


def _common(sub, need_k=True):
    sub.add_argument("--k", type=rational, default=None, help="coupling parameter")
    sub.add_argument("--depth", type=_positive_int, default=12, help="continued-fraction depth")
    sub.add_argument("--grid", type=_positive_int, default=1024, help="sample grid size")
    sub.add_argument("--level", type=_nonneg_int, default=1, help="Cantor refinement level")
    sub.add_argument("--tol", type=_tolerance, default=DEFAULT_TOL, help="solver tolerance")
    sub.add_argument("--case", choices=["former", "latter", "auto"], default="auto", help="proof partition case")
    sub.add_argument("--format", choices=["json", "csv"], default="json")
    sub.add_argument("--output", default=None, help="write to this file instead of stdout")
    sub.add_argument("--override", action="store_true", help="allow |k| below the large-k guard")
    sub.add_argument("--k-min-guard", type=float, default=None, help="large-k guard (default from HORSESHOE_K_MIN_GUARD)")


COMMANDS = {
    "fixed-points": cmd_fixed_points,
    "critical": cmd_critical,
    "foliation-sample": cmd_foliation_sample,
    "leaf": cmd_leaf,
    "tangency-circle": cmd_tangency_circle,
    "curvature": cmd_curvature,
    "speeds": cmd_speeds,
    "find-tangency": cmd_find_tangency,
    "partition": cmd_partition,
    "cantor": cmd_cantor,
    "max-gap": cmd_max_gap,
    "distortion": cmd_distortion,
    "bowen": cmd_bowen,
    "verify": cmd_verify,
    "portrait": cmd_portrait,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="horseshoe", description="Horseshoes in the standard family: every construction step from the command line.")
    subs = ap.add_subparsers(dest="command", required=True)
    s = {}
    for name in list(COMMANDS) + ["sweep"]:
        s[name] = subs.add_parser(name, help=HELP[name], description=f"Exercises: {HELP[name]}.")
        _common(s[name])
    for name in ("foliation-sample", "leaf"):
        s[name].add_argument("--x", type=rational, required=True)
        s[name].add_argument("--y", type=rational, required=True)
        s[name].add_argument("--perturbed", action="store_true", help="use the g_k fields (default rho)")
    s["foliation-sample"].add_argument("--kind", choices=["s", "u", "G"], default="s")
    s["leaf"].add_argument("--which", choices=["s", "u", "G"], default="s")
    s["leaf"].add_argument("--span", type=rational, default=0.1)
    s["leaf"].add_argument("--step", type=rational, default=1e-3)
    s["tangency-circle"].add_argument("--sign", choices=["+", "-"], default="+")
    s["curvature"].add_argument("--x", type=rational, default=0.0)
    s["curvature"].add_argument("--h", type=float, default=1e-4)
    for name in ("speeds", "find-tangency"):
        s[name].add_argument("--iterates", type=int, choices=[0, 1], default=1, help="forward images of the local unstable leaf of p_u")
    s["speeds"].add_argument("--dk", type=float, default=1e-4)
    s["find-tangency"].add_argument("--scan-resolution", type=float, default=None)
    s["partition"].add_argument("kind", choices=["duarte", "proof"])
    for name in ("cantor", "max-gap", "distortion"):
        s[name].add_argument("--partition", choices=["duarte", "proof"], default="proof")
    s["bowen"].add_argument("--lengths", type=rational_list, required=True, help="comma-separated, fractions allowed")
    s["bowen"].add_argument("--total", type=rational, required=True)
    s["verify"].set_defaults(level=3)
    s["verify"].add_argument("--strict", action="store_true", help="exit 1 when the window check fails")
    s["portrait"].add_argument("--orbits", type=_positive_int, default=50)
    s["portrait"].add_argument("--iterations", type=_positive_int, default=200)
    s["portrait"].add_argument("--seed", type=int, default=0)
    s["sweep"].add_argument("--ks", type=rational_list, required=True, help="comma-separated k values")
    s["sweep"].add_argument("--jobs", type=_positive_int, default=1)
    s["sweep"].add_argument("rest", nargs=argparse.REMAINDER, help="subcommand and its flags")
    return ap


def _run_one(argv: List[str]) -> Tuple[dict, Optional[str], int]:
    args = build_parser().parse_args(argv)
    args._exit = 0
    payload, table = COMMANDS[args.command](args)
    return payload, table, args._exit


def _sweep_job(item):
    k, rest = item
    try:
        payload, _, _ = _run_one(rest + ["--k", repr(k)])
        return k, payload
    except HorseshoeError as exc:
        return k, {"error": str(exc), "stage": exc.stage}


def cmd_sweep(args):
    rest = [a for a in args.rest if a != "--"]
    if not rest or rest[0] not in COMMANDS:
        raise ConfigError("sweep needs a subcommand, e.g. 'sweep --ks 100,200 critical'")
    items = [(k, rest) for k in args.ks]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_job, items))
    else:
        results = [_sweep_job(it) for it in items]
    results.sort(key=lambda r: r[0])
    return {"command": rest[0], "results": [{"k": k, "result": r} for k, r in results]}, None


COMMANDS["sweep"] = cmd_sweep


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._exit = 0
    try:
        payload, table = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except HorseshoeError as exc:
        print(f"numerical failure [{exc.stage}]: {exc}", file=sys.stderr)
        return 3
    text = table if args.format == "csv" and table is not None else dumps(payload)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return args._exit


if __name__ == "__main__":
    sys.exit(main())
