"""``wass`` command-line interface.

Exit codes: 0 on success, 2 when an input violates a documented invariant,
1 on internal errors or failed property checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import checks, curves, measures, mixing, ot, pushdiff
from .geometry import AtomVectorField, cosine_conformal_factor
from .measures import DiscreteMeasure, ValidationError, dumps, load_json, measure_from_json
from .tangent import GradientDictionary, TangentProjection


def _measure(path: str) -> DiscreteMeasure:
    return measure_from_json(load_json(path), where=path)


def _field(path: str, base: DiscreteMeasure) -> AtomVectorField:
    data = load_json(path)
    if isinstance(data, dict):
        if "vectors" not in data:
            raise ValidationError(f"{path}: missing field 'vectors'")
        data = data["vectors"]
    try:
        vecs = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: field 'vectors' must be a numeric array") from exc
    if vecs.shape != base.atoms.shape:
        raise ValidationError(f"{path}: field 'vectors' has shape {vecs.shape}, expected {base.atoms.shape}")
    return AtomVectorField(base, vecs)


def _vectors(field: AtomVectorField) -> list:
    return [[float(c) for c in row] for row in field.vectors]


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _metric_for(args, dim: int):
    if getattr(args, "metric", "euclidean") == "conformal":
        return cosine_conformal_factor(args.eps, dim)
    return None


def _map(spec: str, dim: int) -> measures.PointMap:
    kind, _, arg = spec.partition(":")
    if kind == "square":
        return measures.square(dim)
    if kind == "identity":
        return measures.identity(dim)
    if kind == "rotation":
        if dim != 2:
            raise ValidationError("rotation maps need d = 2")
        try:
            return measures.rotation(float(arg))
        except ValueError as exc:
            raise ValidationError(f"rotation angle must be a real, got {arg!r}") from exc
    if kind == "scaling":
        try:
            return measures.scaling(float(arg), dim)
        except ValueError as exc:
            raise ValidationError(f"scaling factor must be a real, got {arg!r}") from exc
    if kind == "affine":
        data = load_json(arg)
        if not isinstance(data, dict) or "A" not in data:
            raise ValidationError(f"{arg}: missing field 'A'")
        A = np.atleast_2d(np.asarray(data["A"], dtype=float))
        if A.shape[1] != dim:
            raise ValidationError(f"{arg}: field 'A' must have {dim} columns")
        return measures.affine(A, data.get("b"))
    raise ValidationError(f"unknown map {spec!r} (expected affine:FILE, square, rotation:THETA, scaling:S)")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_distance(args) -> int:
    mu, nu = _measure(args.mu), _measure(args.nu)
    metric = ot.torus if args.torus else ot.euclidean
    plan, wp = ot.optimal_plan(mu, nu, args.p, metric)
    out = {"wp": wp, "cost": ot.plan_cost(plan, args.p, metric)}
    if args.command == "plan":
        if args.out:
            _write(args.out, dumps(plan.to_json()))
        else:
            out["matrix"] = plan.to_json()["matrix"]
    print(dumps(out))
    return 0


def cmd_geodesic(args) -> int:
    if args.steps < 3:
        raise ValidationError("--steps must be at least 3 (the velocity lives on interior samples)")
    mu, nu = _measure(args.mu), _measure(args.nu)
    curve, velocity = curves.geodesic_curve(mu, nu, np.linspace(0.0, 1.0, args.steps))
    _write(args.out_curve, dumps(curve.to_json()))
    _write(args.out_velocity, dumps(velocity.to_json()))
    print(dumps({"w2": ot.wasserstein(mu, nu, 2), "steps": args.steps,
                 "curve": args.out_curve, "velocity": args.out_velocity}))
    return 0


def cmd_project(args) -> int:
    mu = _measure(args.mu)
    v = _field(args.field, mu)
    metric = _metric_for(args, mu.dim)
    P = TangentProjection(mu, GradientDictionary.parse(args.dict, mu.dim), metric)
    pv = P.project(v)
    print(dumps({"projected": _vectors(pv), "residual": P.residual(v), "rank": P.rank}))
    return 0


def cmd_verify_continuity(args) -> int:
    curve = curves.MeasureCurve.from_json(load_json(args.curve))
    velocity = curves.VelocityCurve.from_json(load_json(args.velocity), curve)
    tests = curves.SpaceTimeTests.parse(args.tests, curve.measures[0].dim)
    if not args.tol > 0:
        raise ValidationError(f"--tol must be > 0, got {args.tol}")
    residual = curves.continuity_residual(curve, velocity, tests, _metric_for(args, curve.measures[0].dim))
    print(dumps({"residual": residual, "tol": args.tol, "pass": residual <= args.tol}))
    return 0


def cmd_pushdiff(args) -> int:
    mu = _measure(args.mu)
    f = _map(args.map, mu.dim)
    v = _field(args.field, mu)
    dictionary = GradientDictionary.parse(args.dict, f.dim_out)
    image = pushdiff.pushforward_differential(f, mu, v)
    P = TangentProjection(image.base, dictionary)
    est, bound = pushdiff.operator_norm_estimate(
        f, mu, GradientDictionary.parse(args.dict, mu.dim), args.samples, np.random.default_rng(args.seed)
    )
    print(dumps({
        "image": image.base.to_json(),
        "image_field": _vectors(image),
        "projected_field": _vectors(P.project(image)),
        "residual": P.residual(image),
        "operator_norm_estimate": est,
        "operator_norm_bound": bound,
    }))
    return 0


def cmd_counterexample(args) -> int:
    if args.K < 1:
        raise ValidationError("--K must be at least 1")
    table = pushdiff.counterexample_table(args.eps, range(1, args.K + 1), args.grid)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["K", "residual"])
    for K, r in table:
        writer.writerow([K, repr(r)])
    text = buf.getvalue().rstrip("\n")
    if args.out:
        _write(args.out, text)
    print(text)
    return 0


def cmd_mix(args) -> int:
    mu, nu = _measure(args.mu), _measure(args.nu)
    lam = args.lam if args.convention == "lam-mu" else 1.0 - args.lam
    dec = mixing.decompose(mu, nu, lam)
    out = {"lambda": lam, "mixed": mixing.mix_measures(mu, nu, lam).to_json(), "decomposition": dec.summary()}
    if args.fields:
        v, w = _field(args.fields[0], mu), _field(args.fields[1], nu)
        u = mixing.canonical_field(dec, v, w)
        out["canonical_base"] = u.base.to_json()
        out["canonical_field"] = _vectors(u)
    print(dumps(out))
    return 0


def cmd_check(args) -> int:
    names = args.suites or ["all"]
    unknown = [n for n in names if n != "all" and n not in checks.SUITES]
    if unknown:
        raise ValidationError(f"unknown suite(s) {unknown}; choose from {sorted(checks.SUITES)} or 'all'")
    results = checks.run(names, args.seed)
    for r in results:
        print(r.line())
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["suite", "passed", "metrics"])
            for r in results:
                writer.writerow([r.name, r.passed, json.dumps(r.metrics, default=float)])
    return 0 if all(r.passed for r in results) else 1


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be an unsigned integer")
    return value


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wass", description="Wasserstein calculus on discrete measures")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("distance", "plan"):
        p = sub.add_parser(name, help="W_p distance" if name == "distance" else "optimal plan and W_p")
        p.add_argument("--mu", required=True)
        p.add_argument("--nu", required=True)
        p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--torus", action="store_true", help="flat-torus ground distance on [0,1)^d")
        if name == "plan":
            p.add_argument("--out", help="write the plan matrix JSON here")
        p.set_defaults(func=cmd_distance)

    p = sub.add_parser("geodesic", help="displacement interpolation with particle velocities")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--out-curve", required=True)
    p.add_argument("--out-velocity", required=True)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("project", help="tangent projection of a vector field")
    p.add_argument("--mu", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--dict", default="poly:3")
    p.add_argument("--metric", choices=("euclidean", "conformal"), default="euclidean")
    p.add_argument("--eps", type=float, default=0.5, help="amplitude of the conformal factor")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("verify-continuity", help="weak continuity-equation residual")
    p.add_argument("--curve", required=True)
    p.add_argument("--velocity", required=True)
    p.add_argument("--tests", default="trig:3,bumps:4")
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--metric", choices=("euclidean", "conformal"), default="euclidean")
    p.add_argument("--eps", type=float, default=0.5)
    p.set_defaults(func=cmd_verify_continuity)

    p = sub.add_parser("pushdiff", help="differential of a pushforward map")
    p.add_argument("--map", required=True, help="affine:FILE | square | rotation:THETA | scaling:S")
    p.add_argument("--mu", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--dict", default="poly:3")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_pushdiff)

    p = sub.add_parser("counterexample", help="conformal tangency defect table over K")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--out", help="also write the CSV table here")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("mix", help="convex mixing and canonical field")
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--convention", choices=("lam-mu", "lam-nu"), default="lam-mu",
                   help="lam-mu: lam*mu + (1-lam)*nu; lam-nu: (1-lam)*mu + lam*nu")
    p.add_argument("--fields", nargs=2, metavar=("V", "W"))
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("check", help="run property suites")
    p.add_argument("suites", nargs="*", help=f"any of {', '.join(checks.SUITES)} or 'all'")
    p.add_argument("--csv", help="write a one-row-per-suite CSV here")
    p.add_argument("--seed", type=_seed, help="override the per-suite default seeds")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"wass: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"wass: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"wass: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
