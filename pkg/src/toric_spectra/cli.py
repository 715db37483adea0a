"""Command-line front end: ``toric-spectra <command> --polytope FILE ...``.

Every run prints a reproducibility header (library version, command,
parameters, SHA-256 of the canonical polytope document) to standard error
and as ``#`` comment lines at the top of CSV output.  Timestamps are only
added with ``--stamp``.

Exit codes: 0 success, 2 invalid polytope or parameters, 3 numerical
non-convergence, 64 command-line usage error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .asymptotics import (IllConditionedFitError, OrthantModel, bump_window, extract_expansion,
                          laplace_normalization, linear_fit, model_P1, pinched_average,
                          pointwise_norm_asymptotic)
from .euler_maclaurin import em_error_report, em_sum, riemann_sum, tau_coefficients
from .kernel import KernelContext, OptimizationError, argmax_phi, distances_at, phi
from .measures import THREADS_ENV, SpectralMeasure, asymptotic_pairing
from .polynomials import Polynomial, parse_poly
from .polytope import PolytopeError, dump_polytope, lattice_points, load_polytope
from .quadrature import QuadratureError, integrate_face

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v)
    return f"{float(v):.17g}"


def parse_point(text, dim):
    """``"1/2,1/3"`` -> tuple of Fractions (decimals are kept exact too)."""
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if len(parts) != dim:
        raise ValueError(f"expected {dim} coordinates in {text!r}")
    return tuple(Fraction(p) for p in parts)


def parse_ints(text):
    return [int(p) for p in str(text).split(",") if p.strip()]


def parse_floats(text):
    """Comma list, or ``start:stop:count`` for an inclusive linear grid."""
    text = str(text)
    if ":" in text:
        a, b, n = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(n))]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_function(spec, dim):
    """``poly:...`` or ``bump:c1,c2:r`` (a smooth bump of radius r)."""
    spec = spec.strip()
    if spec.startswith("bump:"):
        _, center, radius = spec.split(":")
        c = np.array([float(v) for v in center.split(",")])
        r = float(radius)
        if c.shape != (dim,):
            raise ValueError("bump centre has the wrong dimension")
        return lambda Y: bump_window((np.asarray(Y, dtype=float) - c) / r)
    if spec.startswith("poly:"):
        return parse_poly(spec, dim)
    raise ValueError(f"unknown function spec {spec!r}; use poly:... or bump:...")


def _grid_points(P, count):
    lo, hi = P.bounding_box()
    axes = [np.linspace(a, b, count) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    keep = np.all(P.distances(pts) >= -1e-12, axis=1)
    return pts[keep]


# commands -------------------------------------------------------------------------

def cmd_validate(args, P):
    charts = [P.vertex_chart(v) for v in P.vertices]
    one = lambda Y: np.ones(len(Y))
    facet_measure = sum(integrate_face(P, frozenset({i}), one).value for i in range(P.n_facets))
    report = {"delzant": True, "dim": P.dim, "facets": P.n_facets, "vertices": len(P.vertices),
              "unimodular_charts": len(charts), "volume": str(P.exact_volume),
              "boundary_lattice_measure": facet_measure,
              "barycenter_distances": " ".join(str(v) for v in P.lattice_distances(P.barycenter()))}
    return ["key", "value"], [[k, v] for k, v in report.items()], {}


def cmd_lattice(args, P):
    pts = lattice_points(P, args.N)
    return [f"k{j + 1}" for j in range(P.dim)], pts.tolist(), {"count": len(pts)}


def cmd_kernel_eval(args, P):
    ctx = KernelContext(P, args.N, tol=args.tol)
    x = parse_point(args.x, P.dim)
    Y = np.array([[float(v) for v in parse_point(args.y, P.dim)]]) if args.y else _grid_points(P, args.grid)
    vals = np.atleast_1d(ctx.kernel_eval(x, Y))
    interior = bool(np.all(distances_at(P, x) > 0))
    summary = {"log_c": ctx.log_c(x), "argmax": argmax_phi(P, x).tolist(), "phi_max": phi(P, x, x).value}
    if interior:
        summary["laplace_log_c"] = laplace_normalization(P, args.N, x)
        approx = np.atleast_1d(pointwise_norm_asymptotic(P, args.N, x, Y))
    rows = [list(y) + [v, approx[i] if interior else ""] for i, (y, v) in enumerate(zip(Y, vals))]
    return [f"y{j + 1}" for j in range(P.dim)] + ["kernel", "leading_asymptotic"], rows, summary


def cmd_transform(args, P):
    ctx = KernelContext(P, args.N, tol=args.tol)
    f = parse_function(args.f, P.dim)
    rows = []
    for xs in args.x:
        x = parse_point(xs, P.dim)
        rows.append([float(v) for v in x] + [ctx.transform(f, x)])
    return [f"x{j + 1}" for j in range(P.dim)] + ["transform"], rows, {}


def cmd_expand(args, P):
    f = parse_function(args.f, P.dim)
    x = parse_point(args.x, P.dim)
    source = OrthantModel(P.dim) if args.model == "orthant" else P
    rep = extract_expansion(source, f, x, order=args.order, N_grid=parse_ints(args.N_grid), tol=args.tol)
    summary = rep.to_dict()
    if args.model == "orthant" and isinstance(f, Polynomial):
        summary["model_P1"] = model_P1(f, x)
    return ["N", "value", "prediction", "ratio"], [list(r) for r in rep.rows()], summary


def cmd_density(args, P):
    meas = SpectralMeasure(P, args.N, tol=args.tol, threads=args.threads)
    Y = _grid_points(P, args.grid)
    dens = np.atleast_1d(meas.spectral_density(Y))
    rows = [list(y) + [d] for y, d in zip(Y, dens)]
    return [f"y{j + 1}" for j in range(P.dim)] + ["density"], rows, {"lattice_points": len(meas)}


def cmd_pair(args, P):
    f = parse_function(args.f, P.dim)
    if args.series is not None:
        series = asymptotic_pairing(P, f, order=args.series, threads=args.threads)
        rows = [[f"N^-{j}", c] for j, c in enumerate(series.coefficients)]
        return ["term", "coefficient"], rows, {"N_grid": series.N_grid, "residual_norm": series.residual_norm}
    if args.N is None:
        raise ValueError("--N is required unless --series is given")
    meas = SpectralMeasure(P, args.N, tol=args.tol, threads=args.threads)
    if args.k:
        k = parse_ints(args.k)
        return ["quantity", "value"], [["eigensection_average", meas.eigensection_average(k, f)]], {}
    if args.cross_check:
        total, direct = meas.pair(f, cross_check=True)
        rows = [["lattice_sum", total], ["quadrature", direct]]
    else:
        total = meas.pair(f)
        rows = [["lattice_sum", total]]
    rows.append(["lattice_points", len(meas)])
    return ["quantity", "value"], rows, {}


def cmd_moments(args, P):
    meas = SpectralMeasure(P, args.N, tol=args.tol, threads=args.threads)
    rep = meas.moment(parse_ints(args.k), parse_ints(args.m))
    rows = [[m, v, "" if p is None else p, "" if r is None else r]
            for m, v, p, r in zip(rep.exponents, rep.values, rep.predictions, rep.ratios)]
    return ["m", "value", "prediction", "ratio"], rows, {}


def cmd_distribution(args, P):
    meas = SpectralMeasure(P, args.N, tol=args.tol, threads=args.threads)
    table = meas.distribution_function(parse_ints(args.k), parse_floats(args.t_grid), tol=args.level_tol)
    return ["t", "volume"], [list(r) for r in table], {}


def cmd_em_check(args, P):
    f = parse_function(args.f, P.dim)
    Ns = parse_ints(args.N)
    orders = list(range(args.order + 1)) if args.all_orders else [args.order]
    if len(Ns) == 1 and len(orders) == 1:
        rs, es = riemann_sum(P, f, Ns[0]), em_sum(P, f, Ns[0], args.order)
        rows = [[Ns[0], args.order, rs, es, abs(rs - es)]]
        slopes = {}
    else:
        rep = em_error_report(P, f, Ns, orders)
        rows = [list(r) for r in rep.rows]
        slopes = rep.slopes
    exact = {}
    if hasattr(f, "terms"):
        exact = {f"riemann_sum_exact_N{N}": str(riemann_sum(P, f, N, exact=True)) for N in Ns}
    tau = [str(c) for c in tau_coefficients(args.order).coefficients]
    return ["N", "order", "riemann_sum", "em_sum", "abs_error"], rows, {"slopes": slopes, "tau": tau, **exact}


def cmd_localize(args, P):
    f = parse_function(args.f, P.dim)
    g = parse_function(args.g, P.dim)
    x = parse_point(args.x, P.dim)
    rows = []
    for N in parse_ints(args.N_grid):
        ctx = KernelContext(P, N, tol=args.tol)
        rows.append([N, ctx.log_localization_ratio(f, g, x)])
    slope, intercept, r2 = linear_fit([r[0] for r in rows], [r[1] for r in rows])
    return ["N", "log_ratio"], rows, {"slope": slope, "intercept": intercept, "r2": r2}


def cmd_pinch(args, P):
    x = parse_point(args.x, P.dim)
    rep = pinched_average(P, x, args.delta, N_grid=parse_ints(args.N_grid), tol=args.tol)
    rows = [[N, v] for N, v in zip(rep.N_grid, rep.values)]
    return ["N", "value"], rows, rep.to_dict()


# subcommand table: name -> (handler, engine operations the command runs)
COMMANDS = {
    "validate": (cmd_validate, ["load_polytope", "vertex_chart", "lattice_distances", "integrate_face"]),
    "lattice": (cmd_lattice, ["lattice_points"]),
    "kernel-eval": (cmd_kernel_eval, ["log_c", "kernel_eval", "phi", "argmax_phi", "integrate_log",
                                      "hessian_det", "laplace_normalization", "pointwise_norm_asymptotic"]),
    "transform": (cmd_transform, ["transform"]),
    "expand": (cmd_expand, ["extract_expansion", "model_P1"]),
    "density": (cmd_density, ["spectral_density"]),
    "pair": (cmd_pair, ["pair", "integrate", "eigensection_average", "asymptotic_pairing"]),
    "moments": (cmd_moments, ["moment"]),
    "distribution": (cmd_distribution, ["distribution_function", "superlevel_volume", "section_norm"]),
    "em-check": (cmd_em_check, ["riemann_sum", "em_sum", "em_error_report", "tau_coefficients", "shift"]),
    "localize": (cmd_localize, ["localization_ratio"]),
    "pinch": (cmd_pinch, ["pinched_average"]),
}


def build_parser():
    parser = _Parser(prog="toric-spectra", description="Spectral density computations on Delzant polytopes.")
    parser.add_argument("--version", action="version", version=f"toric-spectra {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--polytope", required=True, help="polytope JSON file")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--tol", type=float, default=1e-11, help="quadrature tolerance")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker cap (falls back to ${THREADS_ENV})")
        p.add_argument("--stamp", action="store_true", help="add a timestamp to the header")
        return p

    add("validate", "check the Delzant condition")
    p = add("lattice", "lattice points of N * polytope")
    p.add_argument("--N", type=int, required=True)
    p = add("kernel-eval", "normalized kernel K_N(x, .)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y")
    p.add_argument("--grid", type=int, default=11)
    p = add("transform", "kernel transform of a test function")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", required=True, action="append")
    p.add_argument("--f", required=True)
    p = add("expand", "fit the large-N expansion of the transform")
    p.add_argument("--x", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--N-grid", dest="N_grid", default="50,71,100,141,200,283,400")
    p.add_argument("--model", choices=["polytope", "orthant"], default="polytope",
                   help="expand on the polytope or on the orthant model")
    p = add("density", "spectral density on a grid")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--grid", type=int, default=101)
    p = add("pair", "pair a test function with the spectral measure")
    p.add_argument("--N", type=int)
    p.add_argument("--f", default="poly:1")
    p.add_argument("--cross-check", action="store_true")
    p.add_argument("--k", help="average f against one eigensection instead")
    p.add_argument("--series", type=int, choices=[0, 1, 2],
                   help="fit the large-N series of the pairing up to this order")
    p = add("moments", "moments of one section norm")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--m", default="1,2,3")
    p = add("distribution", "distribution function of one section norm")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--t-grid", dest="t_grid", required=True)
    p.add_argument("--level-tol", dest="level_tol", type=float, default=1e-9)
    p = add("em-check", "compare Riemann sums with Euler-Maclaurin corrections")
    p.add_argument("--f", required=True)
    p.add_argument("--N", required=True, help="one level or a comma list")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--all-orders", action="store_true")
    p = add("localize", "log localization ratio over a grid of levels")
    p.add_argument("--x", required=True)
    p.add_argument("--f", default="poly:1")
    p.add_argument("--g", required=True)
    p.add_argument("--N-grid", dest="N_grid", default="20,40,60,80,100,120")
    p = add("pinch", "averages of a section norm over shrinking windows")
    p.add_argument("--x", required=True)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--N-grid", dest="N_grid", default="50,100,200,400")
    return parser


def header(args, P, polytope_text):
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("command", "out", "stamp", "polytope", "threads")}
    lines = [f"toric-spectra {__version__}", f"command: {args.command}",
             f"polytope-sha256: {hashlib.sha256(polytope_text.encode()).hexdigest()}",
             f"params: {json.dumps(params, sort_keys=True, default=str)}"]
    if args.stamp:
        lines.append(f"timestamp: {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    return lines


def render(args, head, columns, rows, extra):
    if args.format == "json":
        doc = {"header": head, "columns": columns,
               "rows": [[_json_value(v) for v in r] for r in rows], "summary": _json_value(extra)}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    for line in head:
        buf.write(f"# {line}\n")
    for key, val in sorted(extra.items()):
        buf.write(f"# {key}: {json.dumps(_json_value(val), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    v = float(v)
    return v if math.isfinite(v) else str(v)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"toric-spectra: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is None and os.environ.get(THREADS_ENV):
        args.threads = int(os.environ[THREADS_ENV])
    try:
        P = load_polytope(args.polytope)
    except OSError as exc:
        print(f"toric-spectra: cannot read polytope: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PolytopeError as exc:
        print(f"toric-spectra: invalid polytope ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INVALID
    head = header(args, P, dump_polytope(P))
    for line in head:
        print(f"# {line}", file=sys.stderr)
    handler = COMMANDS[args.command][0]
    try:
        columns, rows, extra = handler(args, P)
    except (QuadratureError, OptimizationError, IllConditionedFitError) as exc:
        print(f"toric-spectra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ZeroDivisionError) as exc:
        print(f"toric-spectra: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = render(args, head, columns, rows, extra)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "validate":
        print(f"delzant: true, vertices: {len(P.vertices)}", file=sys.stderr)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
