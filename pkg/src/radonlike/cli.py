"""Command-line entry point: ``radonlike <subcommand> [options]``.

Exit codes: 0 success, 2 usage, 3 schema violation in an input file,
4 domain precondition violated, 5 output not writable.
"""

import argparse
import json
import math
import os
import sys

from . import __version__
from .bench import GridSpec, IndicatorSet, knapp_sweep, restricted_ratio
from .bilinear import BilinearMap
from .curvature import SearchConfig, curvature_verdict
from .errors import DomainError, SchemaError
from .hurwitz_radon import MatrixFamily, construct_family, feasible, verify_family
from .reports import canonical_json, csv_text
from .sublevel import (
    DEFAULT_PERTURB_EPS,
    double_integral_check,
    eval_F,
    f_lower_bound,
    fit_exponent,
    integral_F,
    perturbation_experiment,
    rearrangement_check,
    sublevel_profile,
    tchebyshev_constant,
)

EXIT_USAGE, EXIT_SCHEMA, EXIT_DOMAIN, EXIT_WRITE = 2, 3, 4, 5

# Options that change where output goes, not what it says.
_NOT_CONFIG = {"workers", "out", "format", "csv", "func", "command"}


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None


def load_map(path):
    return BilinearMap.from_json(_read_json(path))


def load_family(path):
    return MatrixFamily.from_json(_read_json(path))


def _search(args):
    return SearchConfig(
        seeds_per_dim=args.seeds_per_dim, iterations=args.iterations, seed=args.seed, workers=args.workers
    )


# -------------------------------------------------------------- commands


def cmd_feasible(args):
    rep = feasible(args.dim, args.codim)
    body = rep.to_json()
    return body, [tuple(body), tuple(body.values())]


def cmd_family(args):
    fam = construct_family(args.n, args.count)
    rows = [("member", "row", "col", "value")]
    for m, a in enumerate(fam.members):
        rows += [(m, i, j, int(a[i, j])) for i in range(fam.n) for j in range(fam.n)]
    return fam.to_json(), rows


def cmd_verify_family(args):
    check = verify_family(load_family(args.family), trials=args.trials, seed=args.seed)
    body = check.to_json()
    return body, [("ok", "det_trials", "det_failures"), (check.ok, check.det_trials, check.det_failures)]


def cmd_curvature(args):
    rep = curvature_verdict(load_map(args.q), args.tol, _search(args))
    body = rep.to_json()
    return body, [("verdict", "min_abs_det", "method", "tolerance"), (rep.verdict, rep.min_abs_det, rep.method, rep.tolerance)]


def cmd_sublevel(args):
    Q = load_map(args.q)
    prof = sublevel_profile(Q, args.eps, args.samples, args.seed, args.workers)
    body = {"profile": prof.to_json(), "fit": None, "fit_error": None}
    try:
        body["fit"] = fit_exponent(prof, args.theta, args.min_hits, args.max_fraction).to_json()
    except DomainError as exc:
        body["fit_error"] = str(exc)
    return body, prof.csv_rows()


def cmd_perturb(args):
    rep = perturbation_experiment(
        load_map(args.q),
        trials=args.trials,
        radius=args.radius,
        theta_target=args.theta_target,
        eps_grid=args.eps or DEFAULT_PERTURB_EPS,
        samples=args.samples,
        seed=args.seed,
        min_hits=args.min_hits,
        max_fraction=args.max_fraction,
        tolerance=args.tol,
        search=_search(args),
        workers=args.workers,
    )
    return rep.to_json(), rep.csv_rows()


def _grid_from_args(args, n):
    if args.h is None:
        return None
    L = args.half_width if args.half_width is not None else 3.0
    return GridSpec(n, L, args.h, args.t_spacing or args.h, args.h_prime)


def cmd_bench(args):
    Q = load_map(args.q)
    if args.mode == "knapp":
        if not args.deltas:
            raise UsageError("--deltas is required in knapp mode")
        grid = _grid_from_args(args, Q.n_in) if args.half_width is not None else None
        rep = knapp_sweep(Q, args.deltas, args.p, args.lq, grid=grid, h=args.h or 1 / 256, seed=args.seed)
        return rep.to_json(), rep.csv_rows()
    if not args.set:
        raise UsageError("--set is required in ratio mode")
    doc = _read_json(args.set)
    if not isinstance(doc, dict) or not isinstance(doc.get("boxes"), list):
        raise SchemaError("set document needs a 'boxes' array")
    try:
        F = IndicatorSet.from_boxes([(b[0], b[1]) for b in doc["boxes"]], dim=2 * Q.n_in)
    except (TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise SchemaError("each box must be [lo, hi] with numeric arrays", ("boxes",)) from None
    grid = _grid_from_args(args, Q.n_in) or GridSpec(Q.n_in, 3.0, 1 / 64, 1 / 64)
    ratio = restricted_ratio(Q, F, args.p, args.lq, grid)
    vol = F.volume
    norm = ratio * vol ** (1.0 / args.p)
    row = {"delta": None, "norm": norm, "volume": vol, "ratio": ratio}
    body = {"ratios": [row], "p": args.p, "q": args.lq, "grid": grid.to_json(), "seed": args.seed, "summary": {}}
    return body, [("delta", "norm", "volume", "ratio"), (None, norm, vol, ratio)]


def _parse_phi(doc):
    if not isinstance(doc, dict) or not isinstance(doc.get("terms"), list):
        raise SchemaError("phi document needs a 'terms' array")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("n must be a positive integer", ("n",))
    terms = {}
    for i, term in enumerate(doc["terms"]):
        if not isinstance(term, dict):
            raise SchemaError("term must be an object", ("terms", i))
        e, c = term.get("exponents"), term.get("coeff")
        if not isinstance(e, list) or len(e) != n or not all(isinstance(v, int) and not isinstance(v, bool) for v in e):
            raise SchemaError(f"exponents must be {n} integers", ("terms", i, "exponents"))
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise SchemaError("coeff must be a number", ("terms", i, "coeff"))
        terms[tuple(e)] = terms.get(tuple(e), 0.0) + float(c)
    return terms, n


def cmd_rearrange(args):
    terms, n = _parse_phi(_read_json(args.phi))
    box = args.box or [1.0] * n
    rep = rearrangement_check(terms, box, args.f_dim, args.samples, args.seed, args.workers)
    body = rep.to_json()
    return body, [("lhs", "rhs", "ci", "pass"), (rep.lhs, rep.rhs, rep.ci_halfwidth, rep.passed)]


def cmd_f_eval(args):
    rows = []
    for s in args.s:
        row = {"s": s, "F": eval_F(s, args.n)}
        if args.theta is not None:
            row["lower_bound"] = f_lower_bound(args.theta, s, args.n)
        rows.append(row)
    body = {"n": args.n, "theta": args.theta, "values": rows}
    if args.q:
        Q = load_map(args.q)
        integral = integral_F(Q, args.samples, args.seed, args.workers)
        body["integral"] = integral.to_json()
        body["double_integral"] = double_integral_check(Q, args.samples, args.seed, args.workers).to_json()
        if args.theta is not None and integral.finite:
            body["tchebyshev_constant"] = tchebyshev_constant(integral.estimate, args.theta, Q.n_in)
    header = ("s", "F") + (("lower_bound",) if args.theta is not None else ())
    return body, [header] + [tuple(r[k] for k in header) for r in rows]


# ----------------------------------------------------------------- parser


def _add_globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="RNG seed (default 0)")
    p.add_argument("--workers", type=int, default=d(os.cpu_count() or 1), help="worker threads")
    p.add_argument("--out", default=d(None), help="output file (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"))
    p.add_argument("--csv", default=d(None), metavar="PATH", help="also write the CSV table here")


def _add_search(p):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seeds-per-dim", type=int, default=4096)
    p.add_argument("--iterations", type=int, default=200)


def build_parser():
    parser = argparse.ArgumentParser(prog="radonlike", description="Radon-like operator toolkit")
    parser.add_argument("--version", action="version", version=f"radonlike {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_globals(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("feasible", cmd_feasible, "feasibility of nonvanishing curvature for (dim, codim)")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--codim", type=int, required=True)

    p = add("family", cmd_family, "construct a maximal-type matrix family")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)

    p = add("verify-family", cmd_verify_family, "verify a matrix family")
    p.add_argument("--family", required=True)
    p.add_argument("--trials", type=int, default=1000)

    p = add("curvature", cmd_curvature, "rotational-curvature verdict for a map")
    p.add_argument("--q", required=True)
    _add_search(p)

    p = add("sublevel", cmd_sublevel, "sublevel profile and exponent fit")
    p.add_argument("--q", required=True)
    p.add_argument("--eps", type=_floats, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--theta", type=_floats, default=[])
    p.add_argument("--min-hits", type=int, default=100)
    p.add_argument("--max-fraction", type=float, default=0.5)

    p = add("perturb", cmd_perturb, "random diagonal perturbation experiment")
    p.add_argument("--q", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--theta-target", type=float, default=0.9)
    p.add_argument("--eps", type=_floats, default=None)
    p.add_argument("--samples", type=int, default=1 << 26)
    p.add_argument("--min-hits", type=int, default=100)
    p.add_argument("--max-fraction", type=float, default=0.002)
    _add_search(p)

    p = add("bench", cmd_bench, "restricted-type ratios on grids")
    p.add_argument("--q", required=True)
    p.add_argument("--mode", choices=("knapp", "ratio"), default="knapp")
    p.add_argument("--deltas", type=_floats, default=None)
    p.add_argument("--set", default=None, help="JSON file with a 'boxes' array (ratio mode)")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--lq", type=float, default=3.0)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--h-prime", type=float, default=None)
    p.add_argument("--t-spacing", type=float, default=None)
    p.add_argument("--half-width", type=float, default=None)

    p = add("rearrange-check", cmd_rearrange, "rearrangement inequality for a multiaffine phi")
    p.add_argument("--phi", required=True)
    p.add_argument("--box", type=_floats, default=None)
    p.add_argument("--f-dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=200_000)

    p = add("f-eval", cmd_f_eval, "evaluate F, its lower bound and F-integrals")
    p.add_argument("--s", type=_floats, default=[1.0])
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--q", default=None)
    p.add_argument("--samples", type=int, default=1_000_000)
    return parser


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _write(text, dest):
    if dest is None or dest == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {dest}: {exc.strerror}") from None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        body, rows = args.func(args)
        report = dict(body)
        report["meta"] = {
            "tool": "radonlike",
            "version": __version__,
            "command": args.command,
            "config": _config(args),
            "seed": args.seed,
        }
        json_text = canonical_json(report)
        table = csv_text(rows)
        _write(json_text if args.format == "json" else table, args.out)
        if args.csv:
            _write(table, args.csv)
    except UsageError as exc:
        print(f"radonlike: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"radonlike: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DomainError as exc:
        print(f"radonlike: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"radonlike: {exc}", file=sys.stderr)
        return EXIT_WRITE
    return 0


if __name__ == "__main__":
    sys.exit(main())
