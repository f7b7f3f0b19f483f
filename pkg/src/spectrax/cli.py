"""Command-line interface: ``spectrax {solve,maxcut,distvar,tensor,spectratope}``.

Exit codes: 0 on success, 2 when some levels failed but partial results were
written, 1 on fatal errors (bad input, solver errors that stop a run).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import List, Optional, Sequence

from . import gram as gm
from . import problems as pb
from . import spectratope as st
from .hierarchy import BoundReport, ProblemSpec, context_for, solve, solve_with_context
from .ideal import IdealPresentation
from .polyring import MonomialOrder, parse, parse_rational

SCHEMA = "spectrax-problem/1"
EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("spectrax")


class InputError(ValueError):
    pass


def workers() -> int:
    env = os.environ.get("SPECTRAX_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError("SPECTRAX_WORKERS must be an integer")
    return os.cpu_count() or 1


# -- problem files ---------------------------------------------------------------------------


def _ideal_from_json(doc: dict, names: Sequence[str], trust_override: Optional[bool] = None) -> IdealPresentation:
    if "generators" not in doc:
        raise InputError("ideal needs a 'generators' list")
    gens = tuple(parse(g, names) for g in doc["generators"])
    trusted = bool(doc.get("trusted_groebner", False))
    if trust_override is not None:
        trusted = trust_override
    order = MonomialOrder.parse(doc.get("order", "grevlex"))
    return IdealPresentation(gens, trusted_groebner=trusted, order=order)


def problem_from_json(doc: dict, skip_gb_check: bool = False) -> ProblemSpec:
    """Parse a ``spectrax-problem/1`` document into a :class:`ProblemSpec`."""
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise InputError(f"unsupported schema {schema!r} (expected {SCHEMA!r})")
    try:
        names = list(doc["variables"])
        objective = parse(doc["objective"], names)
        ideal = _ideal_from_json(doc["ideal"], names)
    except KeyError as exc:
        raise InputError(f"problem file is missing {exc}") from None
    spherical = scale = None
    if "spherical" in doc and doc["spherical"] is not None:
        sdoc = doc["spherical"]
        spherical = tuple(parse(s, names) for s in sdoc["polys"])
        scale = parse_rational(str(sdoc.get("square_scale", "1")))
    spec = ProblemSpec(names, objective, ideal, spherical, scale, doc.get("sense", "minimize"))
    opts = doc.get("options", {})
    if "method" in opts:
        spec.method = opts["method"]
    if "norm" in opts:
        spec.norm = opts["norm"]
    return spec


def load_problem(path: str, skip_gb_check: bool = False) -> ProblemSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_json(doc, skip_gb_check)


def report_to_json(report: BoundReport) -> dict:
    return {
        "kappa": report.kappa,
        "method": report.method,
        "sense": report.sense,
        "monotone_ok": report.monotone_ok,
        "levels": [{"k": r.k, "d_k": r.d_k, "bound": r.bound, "transformed_value": r.transformed,
                    "wall_ms": r.wall_ms, "eig_path": r.eig_path, "eig_residual": r.eig_residual,
                    "converged": r.converged, "status": r.status, "message": r.message}
                   for r in report.levels],
        "warnings": report.warnings,
    }


def _fmt(v) -> str:
    return "none" if v is None else f"{v:.10g}"


def _print_report(report: BoundReport, out=None, label: str = "bound") -> None:
    out = out or sys.stdout
    print(f"kappa={report.kappa} method={report.method} monotone_ok={report.monotone_ok}", file=out)
    for r in report.levels:
        extra = f" {label}={_fmt(r.transformed)}" if r.transformed is not None else ""
        print(f"  k={r.k} d_k={r.d_k} bound={_fmt(r.bound)}{extra} "
              f"path={r.eig_path} ms={r.wall_ms:.1f} status={r.status}"
              + (f" ({r.message})" if r.message else ""), file=out)
    for w in report.warnings:
        print(f"warning: {w}", file=out)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _exit_for(report: BoundReport) -> int:
    return EXIT_PARTIAL if report.partial else EXIT_OK


# -- commands ---------------------------------------------------------------------------------


def cmd_solve(args) -> int:
    spec = load_problem(args.problem, args.skip_gb_check)
    if spec.spherical is None:
        raise InputError("problem file has no 'spherical' section")
    report = solve(spec, args.levels, args.method, args.budget_ms,
                   verify_trusted=not args.skip_gb_check, norm=args.norm)
    if args.out:
        _write(args.out, json.dumps(report_to_json(report), indent=1) + "\n")
    _print_report(report)
    return _exit_for(report)


def cmd_maxcut(args) -> int:
    from .eig import lambda_min_generalized

    if args.seeded_er is not None:
        n, rho, seed = args.seeded_er
        g = pb.erdos_renyi(int(n), float(rho), int(seed))
    elif args.graph:
        g = pb.read_graph(args.graph)
    else:
        raise InputError("give a graph file or --seeded-er n rho seed")
    rows = []
    if args.closed_form:
        for k in range(1, args.levels + 1):
            t0 = time.perf_counter()
            if k == 1:
                Mp, M1 = pb.maxcut_level1_closed_form(g)
            elif k == 2:
                Mp, M1 = pb.maxcut_level2_closed_form(g)
            else:
                raise InputError("closed forms exist for levels 1 and 2 only")
            res = lambda_min_generalized(Mp, M1, want_vector=False)
            rows.append((k, Mp.shape[0], res.lambda_min, pb.cut_from_bound(g, res.lambda_min),
                         (time.perf_counter() - t0) * 1e3, res.path))
        status = EXIT_OK
    else:
        report = solve(pb.maxcut_spec(g), args.levels)
        for r in report.levels:
            rows.append((r.k, r.d_k, r.bound, r.transformed, r.wall_ms, r.eig_path))
        status = _exit_for(report)
    print(f"n={g.n} edges={g.num_edges}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "d_k", "bound", "cut_upper_bound", "ms", "eig_path"])
    for row in rows:
        w.writerow(row)
    _write(args.out, buf.getvalue())
    return status


def _read_points(path: str) -> List[List[Fraction]]:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return [[parse_rational(str(v)) for v in p] for p in json.loads(text)]
    pts = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        try:
            pts.append([parse_rational(p) for p in parts])
        except Exception:
            continue  # header line
    return pts


def cmd_distvar(args) -> int:
    with open(args.ideal) as fh:
        doc = json.load(fh)
    names = list(doc["variables"])
    ideal_doc = doc.get("ideal", doc)
    gens = [parse(g, names) for g in ideal_doc["generators"]]
    points = _read_points(args.points)
    if not points:
        raise InputError("no query points")
    R2 = parse_rational(str(args.radius2))
    base = pb.distance_spec(gens, R2, points[0], names)
    ctx = context_for(base, args.levels, verify_trusted=not args.skip_gb_check)
    for note in base.notes:
        print(f"note: {note}", file=sys.stderr)

    def run(pt):
        spec = pb.distance_spec(gens, R2, pt, names)
        t0 = time.perf_counter()
        rep = solve_with_context(spec, ctx, args.levels, args.method, args.budget_ms)
        ms = (time.perf_counter() - t0) * 1e3
        done = [r for r in rep.levels if r.status == "ok"]
        best = max((r.transformed for r in done), default=None)
        reached = max((r.k for r in done), default=None)
        return pt, best, reached, ms, rep.partial

    with ThreadPoolExecutor(max_workers=workers()) as ex:
        results = list(ex.map(run, points))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["px", "py", "bound", "level_reached", "ms"])
    partial = False
    for pt, best, reached, ms, part in results:
        partial |= part
        coords = [float(v) for v in pt] + [""] * max(0, 2 - len(pt))
        w.writerow([coords[0], coords[1], "none" if best is None else repr(best),
                    "none" if reached is None else reached, f"{ms:.3f}"])
    _write(args.out, buf.getvalue())
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_tensor(args) -> int:
    if args.random is not None:
        t = pb.random_tensor(args.random, args.rank, args.seed)
    elif args.tensor:
        t = pb.read_tensor(args.tensor)
    else:
        raise InputError("give a tensor file or --random n1 n2 n3")
    report = solve(pb.tensor_norm_spec(t), args.levels, args.method)
    print(f"dims={t.dims} frobenius={t.frobenius():.10g}")
    _print_report(report, label="norm_upper_bound")
    if args.out:
        _write(args.out, json.dumps(report_to_json(report), indent=1) + "\n")
    return _exit_for(report)


def _spectratope_preset(args):
    if args.preset:
        if args.preset not in st.PRESETS:
            raise InputError(f"unknown preset {args.preset!r}; choose from {sorted(st.PRESETS)}")
        return st.PRESETS[args.preset]()
    if not args.ideal:
        raise InputError("give an ideal file or --preset")
    with open(args.ideal) as fh:
        doc = json.load(fh)
    names = tuple(doc["variables"])
    ideal = _ideal_from_json(doc["ideal"], names)
    sdoc = doc.get("spherical")
    if not sdoc:
        raise InputError("spectratope input needs a 'spherical' section")
    h = tuple(parse(s, names) for s in sdoc["polys"])
    return st.Preset(names, ideal, h, parse_rational(str(sdoc.get("square_scale", "1"))))


def cmd_spectratope(args) -> int:
    preset = _spectratope_preset(args)
    if len(preset.names) != 2:
        raise InputError("boundary output needs a plane variety (two variables)")
    ctx = preset.context(2 * args.levels + 2, verify_trusted=not args.skip_gb_check)
    tau = st.find_tau(ctx, [parse(v, preset.names) for v in preset.names])
    chain = st.spectratope_chain(ctx, tau + args.levels - 1, tau=tau, method=args.method,
                                 coordinate_names=preset.names)
    polys = [st.boundary_2d(h, args.directions) for h in chain.values()]
    if args.format == "json":
        text = st.boundary_json(polys, {"tau": tau, "method": args.method, "variables": list(preset.names)})
    else:
        text = st.boundary_csv(polys)
    _write(args.out, text)
    print(f"tau={tau} levels={list(chain)} directions={args.directions}", file=sys.stderr)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectrax", description="Spectral relaxation hierarchies for "
                                "polynomial optimization over varieties.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method_default="auto"):
        sp.add_argument("--levels", type=int, default=2)
        sp.add_argument("--method", choices=["auto", "method1", "method2"], default=method_default)
        sp.add_argument("--skip-gb-check", action="store_true",
                        help="trust generators flagged as a Groebner basis without verifying")
        sp.add_argument("--out", help="output path ('-' for standard output)")

    s = sub.add_parser("solve", help="run the hierarchy on a problem file")
    s.add_argument("problem")
    common(s)
    s.add_argument("--budget-ms", type=float, default=None)
    s.add_argument("--norm", choices=[gm.FROBENIUS, gm.ENTRYWISE], default=None,
                   help="Gram-matrix norm (default: the file's options.norm, else frobenius)")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("maxcut", help="max-cut upper bounds")
    m.add_argument("graph", nargs="?")
    m.add_argument("--levels", type=int, default=1)
    m.add_argument("--closed-form", action="store_true")
    m.add_argument("--seeded-er", nargs=3, metavar=("N", "RHO", "SEED"), type=float)
    m.add_argument("--out")
    m.set_defaults(func=cmd_maxcut)

    d = sub.add_parser("distvar", help="distance lower bounds to a bounded variety")
    d.add_argument("ideal")
    d.add_argument("--radius2", required=True)
    d.add_argument("--points", required=True)
    common(d)
    d.add_argument("--budget-ms", type=float, default=None)
    d.set_defaults(func=cmd_distvar)

    t = sub.add_parser("tensor", help="spectral-norm upper bounds for an order-3 tensor")
    t.add_argument("tensor", nargs="?")
    common(t, "method2")
    t.add_argument("--random", nargs=3, type=int, metavar=("N1", "N2", "N3"))
    t.add_argument("--rank", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_tensor)

    g = sub.add_parser("spectratope", help="2-D spectratope boundaries")
    g.add_argument("ideal", nargs="?")
    g.add_argument("--preset", choices=sorted(st.PRESETS))
    common(g, "method2")
    g.add_argument("--directions", type=int, default=360)
    g.add_argument("--format", choices=["csv", "json"], default="csv")
    g.set_defaults(func=cmd_spectratope)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, InputError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
