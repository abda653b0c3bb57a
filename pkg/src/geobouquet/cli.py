"""Command-line interface.

Exit codes: 0 success, 2 computed but the verdict/validation is negative
(outputs are still written), 1 usage or input errors.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .billiards import shoot, validate
from .constructions import (HexagonFamilyParams, SimplexFamilyParams, build_hexagon,
                            build_simplex_family)
from .double import lift
from .errors import GeobouquetError
from .io import (RunManifest, atomic_write, dumps, file_sha256, load_json, obj_mesh,
                 obj_polylines, save_json)
from .polytope import FACE_TOL, Polytope
from .stability import (MARGIN_TOL, STATIONARY_TOL, Bouquet, Verdict, certify)

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE = 0, 1, 2
OUTDIR_ENV = "GEOBOUQUET_OUTDIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.add_argument("--seed", type=int, default=0, help="seed for any stochastic fallback")
    p.add_argument("--face-tol", type=float, default=FACE_TOL)
    p.add_argument("--margin-tol", type=float, default=MARGIN_TOL)
    p.add_argument("--stationary-tol", type=float, default=STATIONARY_TOL)


def build_parser():
    ap = _Parser(prog="geobouquet", description="Stable geodesic bouquets on doubles of polytopes")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("hexagon", help="hexagon family with a 3-loop bouquet")
    p.add_argument("--theta", type=float, required=True, help="angle in (pi/3, pi/2)")
    p.add_argument("--scale", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("simplex", help="rotated dual-simplex family in R^n")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=None, help="tilt; automatic when omitted")
    p.add_argument("--flip", action="store_true", help="use the opposite tilt normals")
    _common(p)

    p = sub.add_parser("shoot", help="follow a billiard ray")
    p.add_argument("--polytope", required=True)
    p.add_argument("--start", type=_floats, required=True)
    p.add_argument("--direction", type=_floats, required=True)
    p.add_argument("--collisions", type=int, required=True)
    p.add_argument("--post-roll", type=float, default=None)
    _common(p)

    p = sub.add_parser("verify", help="re-validate and certify a bouquet file")
    p.add_argument("bouquet")
    p.add_argument("--polytope", default=None,
                   help="polytope file (default: embedded, or polytope.json next to the bouquet)")
    _common(p)

    p = sub.add_parser("smooth", help="smoothing certificates, mesh and refinement")
    p.add_argument("--input", required=True, help="polytope.json")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--level", default="auto", help="level value or 'auto' (length-neutral)")
    p.add_argument("--mesh", type=int, default=None, help="marching-cubes resolution (R^3 only)")
    p.add_argument("--refine", default=None, help="bouquet.json to refine on the surface")
    p.add_argument("--scheme", default="auto",
                   choices=["auto", "polygon", "gauss-hermite", "monte-carlo"])
    p.add_argument("--nodes", type=int, default=9)
    p.add_argument("--samples", type=int, default=200000)
    p.add_argument("--points", type=int, default=200, help="sample points for the certificates")
    p.add_argument("--radius", type=float, default=2.0, help="sampling ball radius")
    p.add_argument("--chain", type=int, default=16, help="uniform chain vertices per loop")
    _common(p)

    p = sub.add_parser("export-obj", help="write a bouquet (and polytope edges) as OBJ polylines")
    p.add_argument("bouquet")
    p.add_argument("--polytope", default=None)
    p.add_argument("--name", default="bouquet.obj")
    _common(p)

    p = sub.add_parser("report", help="summarize the JSON outputs of a run directory")
    p.add_argument("directory")
    _common(p)
    return ap


def _outdir(args):
    d = args.out or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _manifest(argv, args, inputs=(), extra_tol=None):
    tol = {"face_tol": args.face_tol, "margin_tol": args.margin_tol,
           "stationary_tol": args.stationary_tol}
    if extra_tol:
        tol.update(extra_tol)
    return RunManifest(command=list(argv), version=__version__,
                       input_hashes={os.path.basename(p): file_sha256(p) for p in inputs},
                       seeds={"seed": args.seed}, tolerances=tol)


def _finish(out, manifest, t0, code):
    manifest.wall_time = time.perf_counter() - t0
    save_json(os.path.join(out, "manifest.json"), manifest)
    # timing lives outside the JSON outputs so reruns stay byte-identical
    atomic_write(os.path.join(out, "timing.txt"), f"wall_time_s {manifest.wall_time:.6f}\n")
    return code


def _certificate_code(cert):
    return EXIT_OK if cert.verdict is Verdict.STABLE else EXIT_NEGATIVE


def _cmd_hexagon(args, argv):
    t0 = time.perf_counter()
    P, B = build_hexagon(HexagonFamilyParams(args.theta, args.scale))
    cert = certify(B, args.margin_tol, args.stationary_tol)
    out = _outdir(args)
    save_json(os.path.join(out, "polytope.json"), P)
    save_json(os.path.join(out, "bouquet.json"), B)
    save_json(os.path.join(out, "certificate.json"), cert)
    return _finish(out, _manifest(argv, args), t0, _certificate_code(cert))


def _cmd_simplex(args, argv):
    t0 = time.perf_counter()
    fam = build_simplex_family(SimplexFamilyParams(args.dim, args.epsilon, args.flip))
    cert = certify(fam.bouquet, args.margin_tol, args.stationary_tol)
    out = _outdir(args)
    save_json(os.path.join(out, "polytope.json"), fam.polytope)
    save_json(os.path.join(out, "bouquet.json"), fam.bouquet)
    save_json(os.path.join(out, "certificate.json"), cert)
    save_json(os.path.join(out, "construction.json"), {
        "dim": args.dim, "epsilon": fam.epsilon, "phi": fam.phi,
        "simplex": fam.simplex, "tilt_normals": fam.tilt_normals,
        "planes": [pl.to_json() for pl in fam.planes], "checks": fam.checks})
    return _finish(out, _manifest(argv, args), t0, _certificate_code(cert))


def _load_polytope(path):
    return Polytope.from_json(load_json(path))


def _cmd_shoot(args, argv):
    t0 = time.perf_counter()
    P = _load_polytope(args.polytope)
    T = shoot(P, args.start, args.direction, args.collisions, post_roll=args.post_roll,
              tol=args.face_tol)
    rep = validate(P, T, args.face_tol)
    g = lift(P, T, 0, args.face_tol)
    out = _outdir(args)
    save_json(os.path.join(out, "trajectory.json"), {
        "trajectory": T.to_json(proper=rep.proper), "report": rep.to_json(),
        "length": T.length, "lift": type(g).__name__, "end_sheet": g.end_sheet})
    code = EXIT_OK if rep.ok else EXIT_NEGATIVE
    return _finish(out, _manifest(argv, args, [args.polytope]), t0, code)


def _resolve_polytope(args, data):
    if args.polytope:
        return _load_polytope(args.polytope), [args.polytope]
    if "polytope" in data:
        return Polytope.from_json(data["polytope"]), []
    guess = os.path.join(os.path.dirname(os.path.abspath(args.bouquet)), "polytope.json")
    if os.path.exists(guess):
        return _load_polytope(guess), [guess]
    raise FileNotFoundError("no polytope given, embedded, or found next to the bouquet")


def _cmd_verify(args, argv):
    t0 = time.perf_counter()
    data = load_json(args.bouquet)
    P, used = _resolve_polytope(args, data)
    B = Bouquet.from_json(P, data, args.face_tol)
    cert = certify(B, args.margin_tol, args.stationary_tol)
    reports = [lp.report.to_json() for lp in B.loops]
    out = _outdir(args)
    body = cert.to_json()
    body["loop_reports"] = reports
    body["all_loops_valid"] = all(r["ok"] for r in reports)
    save_json(os.path.join(out, "certificate.json"), body)
    code = EXIT_OK if (cert.verdict is Verdict.STABLE and body["all_loops_valid"]) else EXIT_NEGATIVE
    return _finish(out, _manifest(argv, args, [args.bouquet] + used), t0, code)


def _cmd_smooth(args, argv):
    from .smoothing import (SmoothField, extract_surface, length_neutral_level, refine_bouquet,
                            smoothing_report)
    t0 = time.perf_counter()
    P = _load_polytope(args.input)
    F = SmoothField(P, args.sigma, scheme=args.scheme, nodes=args.nodes, samples=args.samples,
                    seed=args.seed)
    level = length_neutral_level(args.sigma) if args.level == "auto" else float(args.level)
    out = _outdir(args)
    rng = np.random.default_rng(args.seed)
    report = smoothing_report(F, level, rng, n_points=args.points, radius=args.radius)
    ok = report["hessian_lambda_min"] > 0 and report["sampled_min_K"] > 0
    inputs = [args.input]
    if args.mesh:
        mesh = extract_surface(F, level, args.mesh)
        if not mesh.watertight:
            raise GeobouquetError("mesh is not watertight; refusing to write it")
        atomic_write(os.path.join(out, "surface.obj"), obj_mesh(mesh.vertices, mesh.faces))
        report["mesh"] = mesh.summary()
    if args.refine:
        data = load_json(args.refine)
        B = Bouquet.from_json(P, data, args.face_tol)
        res = refine_bouquet(F, B, level=level, m=args.chain)
        report["refinement"] = res.to_json()
        report["spectrum"] = res.fd_spectrum
        ok = ok and res.verdict is Verdict.STABLE
        inputs.append(args.refine)
    save_json(os.path.join(out, "smoothing.json"), report)
    man = _manifest(argv, args, inputs, {"sigma": args.sigma, "level": level})
    return _finish(out, man, t0, EXIT_OK if ok else EXIT_NEGATIVE)


def _polytope_edges(P):
    """Edges (pairs of vertices sharing n-1 faces) of a polytope in R^2 or R^3."""
    V = P.vertices
    inc = P.face_adjacency
    edges = []
    for i in range(len(V)):
        for j in range(i + 1, len(V)):
            if len(inc[i] & inc[j]) >= P.dim - 1:
                edges.append(np.array([V[i], V[j]]))
    return edges


def _cmd_export_obj(args, argv):
    t0 = time.perf_counter()
    data = load_json(args.bouquet)
    P, used = _resolve_polytope(args, data)
    if P.dim > 3:
        raise ValueError("OBJ export needs a polytope of dimension at most 3")
    lines = [np.asarray(lp["points"], dtype=float) for lp in data["loops"]]
    names = [f"loop{i}" for i in range(len(lines))]
    edges = _polytope_edges(P)
    names += [f"edge{i}" for i in range(len(edges))]
    out = _outdir(args)
    atomic_write(os.path.join(out, args.name), obj_polylines(lines + edges, names))
    return _finish(out, _manifest(argv, args, [args.bouquet] + used), t0, EXIT_OK)


def _cmd_report(args, argv):
    d = args.directory
    summary = {}
    for name in sorted(os.listdir(d)):
        if not name.endswith(".json") or name == "summary.json":
            continue
        data = load_json(os.path.join(d, name))
        if isinstance(data, dict):
            keep = {k: data[k] for k in ("verdict", "triviality_margin", "stationarity_residual",
                                         "max_reflection_residual", "kappa_hat", "rho",
                                         "sampled_min_K", "hessian_lambda_min", "epsilon")
                    if k in data}
            summary[name] = keep
    text = dumps(summary)
    sys.stdout.write(text)
    atomic_write(os.path.join(d, "summary.json"), text)
    return EXIT_OK


COMMANDS = {"hexagon": _cmd_hexagon, "simplex": _cmd_simplex, "shoot": _cmd_shoot,
            "verify": _cmd_verify, "smooth": _cmd_smooth, "export-obj": _cmd_export_obj,
            "report": _cmd_report}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except (GeobouquetError, ValueError, OSError, KeyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
