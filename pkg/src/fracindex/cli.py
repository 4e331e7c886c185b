"""Command-line entry point: ``fracindex <subcommand> [options]``.

Every run records a manifest of its resolved parameters; ``--manifest FILE``
replays one.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, configurations, definiteness, discrete_geodesics, sampler, spaces
from .errors import ExcessClipping, FracIndexError, GNotFailing, NoPositivityFound

log = logging.getLogger("fracindex")

EXIT_OK, EXIT_NEGATIVE, EXIT_EXHAUSTED, EXIT_USAGE = 0, 2, 3, 64

SUBCOMMANDS = ("distance", "check-nd", "covariance", "index", "critical", "condition-g",
               "witness", "sample", "variogram", "mesh-geodesic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("space")
    g.add_argument("--space", default="circle",
                   choices=["circle", "sphere", "hyperbolic", "euclidean", "cylinder", "flat_torus", "warped"])
    g.add_argument("--space-json", help="space descriptor as JSON, overrides --space")
    g.add_argument("--L", type=float, default=spaces.TWO_PI, help="circumference (circle, cylinder)")
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--lengths", type=_floats, default=None, help="torus circumferences")
    g.add_argument("--warp-a", type=float, default=1.0, help="warp f(z) = 1 + a z^2")
    common.add_argument("--H", type=float, default=0.5)
    common.add_argument("--n", type=int, default=24, help="number of points")
    common.add_argument("--random", action="store_true", help="random points instead of structured")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tol-scale", type=float, default=definiteness.DEFAULT_TOL_SCALE)
    common.add_argument("--eps-schedule", type=_floats, default=list(configurations.DEFAULT_EPS))
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=["json", "csv", "ffld"], default="json")
    common.add_argument("--threads", type=int, default=1)

    parser = _Parser(prog="fracindex", description="Negative definiteness of d^{2H} on model spaces")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--manifest", help="replay the run recorded in this manifest")
    parser.add_argument("--replay-out", help="output directory for a replayed manifest")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("distance", parents=[common], help="distance between two points or a distance dump")
    p.add_argument("--p", type=_floats)
    p.add_argument("--q", type=_floats)

    sub.add_parser("check-nd", parents=[common], help="centred-Gram spectral test")

    p = sub.add_parser("covariance", parents=[common], help="pinned fBm covariance")
    p.add_argument("--origin", type=_floats)

    p = sub.add_parser("index", parents=[common], help="bracket the fractional index")
    p.add_argument("--H-start", type=float, default=0.05)
    p.add_argument("--H-stop", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=4)

    p = sub.add_parser("critical", parents=[common], help="search for H-critical configurations")
    p.add_argument("--budget", type=int, default=8)

    p = sub.add_parser("condition-g", parents=[common], help="condition (G) on an antipodal quadruple")
    p.add_argument("--base", type=float, default=0.0)
    p.add_argument("--offset", type=float, default=np.pi / 2)

    sub.add_parser("witness", parents=[common], help="perturbation witness of nonexistence")

    for name in ("sample", "variogram"):
        p = sub.add_parser(name, parents=[common], help=f"{name} of a Gaussian field")
        p.add_argument("--samples", type=int, default=20000)
        p.add_argument("--origin", type=_floats)
        p.add_argument("--lam", type=float, default=None, help="stationary field exp(-lam d^2H)")

    p = sub.add_parser("mesh-geodesic", parents=[common], help="graph geodesic on a parametric chart")
    p.add_argument("--chart", choices=["flat", "hyperboloid", "warped"], default="hyperboloid")
    p.add_argument("--z-min", type=float, default=-1.0)
    p.add_argument("--z-max", type=float, default=1.0)
    p.add_argument("--n-theta", type=int, default=64)
    p.add_argument("--n-z", type=int, default=33)
    p.add_argument("--stencil", type=int, default=3)
    p.add_argument("--from", dest="source", type=_floats, default=[0.0, 0.0])
    p.add_argument("--to", dest="target", type=_floats, default=[np.pi, 0.0])
    return parser


def _space(args) -> spaces.Space:
    if args.space_json:
        return spaces.space_from_json(json.loads(args.space_json))
    desc = {"space": args.space, "L": args.L, "dim": args.dim, "radius": args.radius,
            "warp": {"kind": "quadratic", "a": args.warp_a}}
    if args.lengths:
        desc["lengths"] = args.lengths
    return spaces.space_from_json(desc)


def _points(space, args):
    if args.random:
        return space.sample_points(args.n, np.random.default_rng(args.seed))
    return space.structured_points(args.n)


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(type(o))
    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


# -- subcommands: each returns (exit code, {filename suffix: content}) ------------------

def cmd_distance(args, space):
    if args.p is not None and args.q is not None:
        d = spaces.distance(space, args.p, args.q)
        return EXIT_OK, {"json": _json({"distance": d, "p": args.p, "q": args.q}),
                         "csv": _csv(["distance"], [[d]])}
    pts = _points(space, args)
    D = spaces.distance_matrix(space, pts)
    rows = [(i, j, D[i, j], D[i, j] ** (2 * args.H)) for i in range(len(pts)) for j in range(len(pts))]
    return EXIT_OK, {"csv": _csv(["i", "j", "d", "d2H"], rows),
                     "json": _json({"points": pts, "distances": D})}


def cmd_check_nd(args, space):
    rep = definiteness.centered_gram(space, _points(space, args), args.H, args.tol_scale)
    report = {"H": rep.H, "verdict": rep.verdict, "max_eigenvalue": rep.max_eigenvalue,
              "tolerance": rep.tolerance, "witness": rep.witness, "witness_form": rep.witness_form,
              "certified": rep.certified}
    return EXIT_OK, {"json": _json(report),
                     "csv": _csv(["index", "eigenvalue"], list(enumerate(rep.spectrum)))}


def cmd_covariance(args, space):
    pts = _points(space, args)
    origin = args.origin if args.origin is not None else pts[0]
    cov = definiteness.covariance_matrix(space, origin, pts, args.H, args.tol_scale)
    rows = [(i, j, cov.entries[i, j]) for i in range(len(pts)) for j in range(len(pts))]
    return EXIT_OK, {"json": _json({"origin": cov.origin, "min_eigenvalue": cov.min_eigenvalue,
                                    "psd": cov.psd, "entries": cov.entries}),
                     "csv": _csv(["i", "j", "cov"], rows)}


def cmd_index(args, space):
    sampler_spec = definiteness.PointSampler(n_points=args.n, structured=not args.random)
    b = definiteness.estimate_fractional_index(space, sampler_spec, args.H_start, args.H_stop,
                                               args.step, args.budget, args.seed, args.tol_scale,
                                               args.threads)
    rows = [(c["H"], c["max_ratio"], c["witness"] is not None) for c in b.cells]
    return EXIT_OK, {"json": _json(b.to_json()), "csv": _csv(["H", "max_ratio", "violation"], rows)}


def cmd_critical(args, space):
    r = configurations.search_critical(space, args.n, args.H, args.budget, args.seed)
    report = {"form": r.form, "scale": r.scale, "critical": r.critical, "starts": r.starts,
              "configuration": r.configuration.to_json() if r.configuration else None}
    code = EXIT_OK if r.critical else EXIT_EXHAUSTED
    return code, {"json": _json(report), "csv": _csv(["form", "scale", "critical"],
                                                     [[r.form, r.scale, r.critical]])}


def cmd_condition_g(args, space):
    config = configurations.antipodal_quadruple(space, args.base, args.offset)
    rep = configurations.check_condition_g(space, config)
    report = {"configuration": config.to_json(), "span_dims": rep.span_dims, "dim": rep.dim,
              "passed": rep.passed}
    return EXIT_OK, {"json": _json(report),
                     "csv": _csv(["index", "span_dim"], list(enumerate(rep.span_dims)))}


def cmd_witness(args, space):
    cert = configurations.witness_pipeline(space, args.H, args.eps_schedule)
    rows = list(zip(cert.eps_values, cert.forms, cert.slope_estimates))
    return EXIT_OK, {"json": _json(cert.to_json()), "csv": _csv(["eps", "form", "slope"], rows)}


def _sample(args, space):
    pts = _points(space, args)
    if args.lam is not None:
        return sampler.sample_stationary(space, pts, args.H, args.lam, args.samples, args.seed)
    origin = args.origin if args.origin is not None else pts[0]
    return sampler.sample_fbm(space, origin, pts, args.H, args.samples, args.seed)


def cmd_sample(args, space):
    s = _sample(args, space)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in s.values:
        writer.writerow([repr(float(x)) for x in row])
    report = {"n_samples": s.n_samples, "n_points": len(s.points), "points": s.points,
              "clipped_mass": s.clipped_mass, "trace": s.trace, "seed": s.seed}
    return EXIT_OK, {"csv": buf.getvalue(), "json": _json(report), "ffld": s.values}


def cmd_variogram(args, space):
    rows = sampler.variogram_check(_sample(args, space))
    flagged = [r for r in rows if abs(r.z) > 4]
    report = {"rows": [vars(r) for r in rows], "flagged": len(flagged)}
    return EXIT_OK, {"json": _json(report),
                     "csv": _csv(["i", "j", "empirical", "target", "z"],
                                 [(r.i, r.j, r.empirical, r.target, r.z) for r in rows])}


def cmd_mesh_geodesic(args, space):
    chart = discrete_geodesics.chart_from_json({"chart": args.chart, "z_min": args.z_min, "z_max": args.z_max,
                                                "warp": {"kind": "quadratic", "a": args.warp_a}})
    g = discrete_geodesics.build_graph(chart, args.n_theta, args.n_z, args.stencil)
    u, v = g.vertex(*args.source), g.vertex(*args.target)
    length, path = discrete_geodesics.graph_distance(g, u, v)
    prm = g.params(path)
    report = {"chart": chart.to_json(), "length": length, "path": prm,
              "deviation": discrete_geodesics.path_deviation(prm, float(g.params(u)[0, 1])),
              "dz": g.dz}
    dist = discrete_geodesics.distances_from(g, u)
    allp = g.params(np.arange(g.n_vertices))
    rows = [(t, z, d) for (t, z), d in zip(allp, dist)]
    return EXIT_OK, {"json": _json(report), "csv": _csv(["theta", "z", "distance"], rows)}


COMMANDS = {
    "distance": cmd_distance, "check-nd": cmd_check_nd, "covariance": cmd_covariance,
    "index": cmd_index, "critical": cmd_critical, "condition-g": cmd_condition_g,
    "witness": cmd_witness, "sample": cmd_sample, "variogram": cmd_variogram,
    "mesh-geodesic": cmd_mesh_geodesic,
}


def _configure_logging() -> None:
    level = os.environ.get("FRACINDEX_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve(argv, parser) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.manifest:
        with open(args.manifest) as fh:
            recorded = json.load(fh)["params"]
        out = args.replay_out or recorded.get("out")
        args = parser.parse_args([recorded["command"]])
        vars(args).update(recorded)
        args.out = out
        args.manifest = None
    if args.command is None:
        raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
    if not 0.0 < args.H <= 1.0:
        raise UsageError(f"--H must lie in (0, 1], got {args.H}")
    if args.n < 1 or args.threads < 1:
        raise UsageError("--n and --threads must be positive")
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**63))
        log.info("no --seed given, using %d", args.seed)
    return args


def run(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = _resolve(sys.argv[1:] if argv is None else list(argv), parser)
        space = _space(args)
    except UsageError as exc:
        print(f"fracindex: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"fracindex: invalid space: {exc}", file=sys.stderr)
        return EXIT_USAGE

    params = {k: v for k, v in vars(args).items() if k not in ("manifest", "replay_out")}
    manifest = _json({"version": __version__, "params": params, "seed": args.seed})
    try:
        code, outputs = COMMANDS[args.command](args, space)
    except GNotFailing as exc:
        code, outputs = EXIT_NEGATIVE, {"json": _json({"result": "GNotFailing", "detail": str(exc)})}
    except ExcessClipping as exc:
        code, outputs = EXIT_NEGATIVE, {"json": _json({"result": "ExcessClipping", "clipped": exc.clipped,
                                                       "trace": exc.trace})}
    except NoPositivityFound as exc:
        code, outputs = EXIT_EXHAUSTED, {"json": _json({"result": "NoPositivityFound", "detail": str(exc)})}
    except (FracIndexError, ValueError) as exc:
        print(f"fracindex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    fmt = args.format if args.format in outputs else "json"
    content = outputs[fmt]
    name = f"{args.command}.{fmt}"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "ffld":
            sampler.write_ffld(content, out / name)
        else:
            (out / name).write_text(content)
        (out / "manifest.json").write_text(manifest)
    else:
        if fmt == "ffld":
            print("fracindex: --format ffld needs --out", file=sys.stderr)
            return EXIT_USAGE
        sys.stdout.write(content)
        sys.stderr.write(manifest)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
