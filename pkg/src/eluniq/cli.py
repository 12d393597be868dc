"""Command-line front end: ``eluniq <command> ...``.

Exit codes: 0 success, 1 certificate rejected, 2 usage or I/O error,
3 infeasible problem, 4 solver failure, 5 no admissible resolution cell.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import estimators, io, simulation
from .model import (
    EluniqError,
    InfeasibleError,
    InvalidProblem,
    NumericalLimitError,
    ResolutionInfeasible,
    UnboundedError,
)
from .resolution import lowres_map, resolution_map
from .uniqueness import DEFAULT_TOL, analyze_element, uniqueness_map, verify_certificate

EXIT_OK, EXIT_REJECTED, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_RESOLUTION = 0, 1, 2, 3, 4, 5

log = logging.getLogger("eluniq")


def _default_tol() -> float:
    raw = os.environ.get("ELUNIQ_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ELUNIQ_TOL={raw!r} is not a number") from None
    if not tol > 0:
        raise argparse.ArgumentTypeError("ELUNIQ_TOL must be positive")
    return tol


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return val


def _element(text):
    return _positive_int(text) - 1


def _jobs_arg(p):
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1, help="worker threads (default: CPU count)")


def cmd_simgen(args) -> int:
    spec = simulation.SimulationSpec(n=args.n, factor=args.factor, sigma=args.sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system, x_true = simulation.simulated_system(spec)
    io.write_matrix(out / "A.csv", system.A)
    io.write_vector(out / "b.csv", system.b)
    io.write_vector(out / "x_true.csv", x_true)
    prior = {"type": args.prior}
    if args.prior == "box":
        prior.update(dmin=simulation.BOX_LIMITS[0], dmax=simulation.BOX_LIMITS[1])
    if args.prior == "denoise_nn":
        prior["sigma"] = "auto"
    io.write_manifest(out / "problem.json", prior, extra={"x_true": "x_true.csv"})
    print(f"wrote {spec.m}x{spec.n} system to {out}")
    return EXIT_OK


def cmd_unique(args) -> int:
    problem = io.load_problem(args.problem)
    ks = None if args.k is None else [args.k]
    bounds = uniqueness_map(problem, tol=args.tol, jobs=args.jobs, ks=ks)
    io.write_uniqueness_csv(args.out, bounds)
    print(f"{sum(b.unique for b in bounds)} of {len(bounds)} elements unique")
    return EXIT_OK


def cmd_resolution(args) -> int:
    problem = io.load_problem(args.problem)
    cells = resolution_map(problem, strategy=args.strategy, jobs=args.jobs)
    io.write_resolution_csv(args.out, cells)
    if args.c_out:
        io.write_matrix(args.c_out, np.array([c.c for c in cells]))
    if args.svg:
        from .plotting import plot_traces

        res = np.full(problem.n, np.nan)
        for c in cells:
            res[c.k] = c.resolution_samples
        plot_traces(args.svg, {"resolution": res}, "resolution (samples)")
    print(f"{len(cells)} cells written")
    return EXIT_OK


def cmd_estimate(args) -> int:
    system, prior, base = io.load_system(args.problem)
    manifest = io.load_manifest(args.problem)
    x_true = io.read_vector(base / manifest["x_true"]) if "x_true" in manifest else None
    if args.method == "l1":
        est = estimators.basis_pursuit(system)
    elif args.method == "nnls":
        est = estimators.nnls_estimate(system)
    else:
        if args.dmin is not None and args.dmax is not None:
            box = io.box_from_prior({"dmin": args.dmin, "dmax": args.dmax}, system.n)
        elif prior.get("type") == "box":
            box = io.box_from_prior(prior, system.n, base)
        else:
            raise io.ManifestError("boxls needs a box prior in the manifest or --dmin/--dmax")
        est = estimators.box_minnorm_estimate(system, box)
    io.write_estimate_csv(args.out, x_true, est)
    if x_true is not None:
        print(f"max |error| = {np.max(np.abs(est - x_true)):.3e}")
    return EXIT_OK


def cmd_certify(args) -> int:
    problem = io.load_problem(args.problem)
    if args.verify:
        cert = io.read_certificate(args.verify)
        if args.k is not None and cert.k != args.k:
            raise io.ManifestError(f"certificate is for k={cert.k + 1}, not k={args.k + 1}")
        report = verify_certificate(problem, cert.k, cert, tol=args.tol, require_unique=False)
        body = {"k": cert.k + 1, "verified": report.sound, "unique": report.unique, "failures": report.failures}
        text = json.dumps(body, indent=1)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)
        return EXIT_OK if report.sound else EXIT_REJECTED
    if args.k is None or args.out is None:
        raise io.ManifestError("certify needs --k and --out (or --verify FILE)")
    bounds, cert = analyze_element(problem, args.k, tol=args.tol)
    if cert is None:
        raise UnboundedError(f"k={args.k + 1}: an unbounded side has no finite certificate")
    report = verify_certificate(problem, args.k, cert, tol=args.tol, require_unique=False)
    io.write_certificate(args.out, cert, report.sound, report.unique)
    print(f"k={args.k + 1}: lb={cert.lb:.12g} ub={cert.ub:.12g} verified={report.sound} unique={report.unique}")
    return EXIT_OK if report.sound else EXIT_SOLVER


def cmd_figures(args) -> int:
    written = simulation.run_figures(args.out, jobs=args.jobs)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eluniq", description="Element-wise uniqueness and resolution analysis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simgen", help="write the blur-and-decimate test problem")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--factor", type=int, default=2)
    p.add_argument("--prior", choices=io.PRIOR_TYPES, default="nonneg")
    p.set_defaults(func=cmd_simgen)

    tol = _default_tol()
    p = sub.add_parser("unique", help="bounds and uniqueness per element")
    p.add_argument("--problem", required=True)
    p.add_argument("--k", type=_element, help="single 1-based element")
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--out", required=True)
    _jobs_arg(p)
    p.set_defaults(func=cmd_unique)

    p = sub.add_parser("resolution", help="resolution cells per element")
    p.add_argument("--problem", required=True)
    p.add_argument("--strategy", choices=("full", "stride"), default="full")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--c-out", help="also write the cell vectors, one row per computed element")
    _jobs_arg(p)
    p.set_defaults(func=cmd_resolution)

    p = sub.add_parser("estimate", help="reference reconstructions")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=("l1", "nnls", "boxls"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dmin", type=float)
    p.add_argument("--dmax", type=float)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("certify", help="dual certificate for one element")
    p.add_argument("--problem", required=True)
    p.add_argument("--k", type=_element)
    p.add_argument("--out")
    p.add_argument("--verify", metavar="JSON", help="check an existing certificate instead of computing one")
    p.add_argument("--tol", type=float, default=tol)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("figures", help="regenerate the simulation figures and their data")
    p.add_argument("--out", required=True)
    _jobs_arg(p)
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except argparse.ArgumentTypeError as exc:
        print(f"eluniq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ResolutionInfeasible as exc:
        print(f"eluniq: resolution infeasible at {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except InfeasibleError as exc:
        print(f"eluniq: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalLimitError, UnboundedError) as exc:
        print(f"eluniq: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidProblem, io.ManifestError, ValueError, IndexError, OSError, KeyError) as exc:
        print(f"eluniq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EluniqError as exc:
        print(f"eluniq: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
