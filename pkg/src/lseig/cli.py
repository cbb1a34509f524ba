"""Command line entry point ``lseig``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import ExperimentConfig, run_adaptive, run_apriori, run_curl_failure
from .reference import write_reference


def _thetas(text):
    text = text.strip()
    if not text:
        return ()
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad theta list {text!r}") from None
    for v in vals:
        if not 0.0 < v <= 1.0:
            raise argparse.ArgumentTypeError(f"theta must lie in (0, 1], got {v}")
    return vals


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _add_globals(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--dump-mesh", action="store_true", default=d if suppress else False,
                   help="write every mesh as an ASCII dump next to the CSVs")
    p.add_argument("--dump-matrices", action="store_true", default=d if suppress else False,
                   help="write the pencil blocks A, B, C, M in Matrix Market format")
    p.add_argument("--quad-degree", type=_positive, default=d if suppress else 6,
                   help="quadrature degree for error norms (default 6)")
    p.add_argument("-v", "--verbose", action="store_true", default=d if suppress else False)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lseig",
        description="Least-squares finite element eigenvalue experiments for the Dirichlet Laplacian.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apriori", help="uniform refinement convergence table")
    p.add_argument("--formulation", choices=["f1", "f1star", "llstar", "pep", "pemd"], default="f1")
    p.add_argument("--sigma", choices=["rt0", "bdm1", "cg1vec"], default="rt0")
    p.add_argument("--domain", choices=["square", "lshape"], default="square")
    p.add_argument("--levels", type=_positive, default=5)
    p.add_argument("--num-eigs", type=_positive, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_globals(p, suppress=True)

    p = sub.add_parser("curl-failure", help="F1curl on the L-shape against the F1/RT0 control")
    p.add_argument("--levels", type=_positive, default=5)
    p.add_argument("--out", type=Path, required=True)
    _add_globals(p, suppress=True)

    p = sub.add_parser("adaptive", help="adaptive F1/RT0 runs on the L-shape")
    p.add_argument("--theta", type=_thetas, default=(0.1, 0.3, 0.5),
                   help="comma separated bulk parameters; 1.0 (uniform) is always added")
    p.add_argument("--max-dofs", type=_positive, default=100_000)
    p.add_argument("--out", type=Path, required=True)
    _add_globals(p, suppress=True)

    p = sub.add_parser("oracle", help="regenerate reference eigenvalues")
    p.add_argument("domain", choices=["lshape"])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-level", type=_positive, default=8,
                   help="finest uniform level of the P1 sequence (default 8)")
    _add_globals(p, suppress=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    common = dict(out=args.out, quad_degree=args.quad_degree,
                  dump_mesh=args.dump_mesh, dump_matrices=args.dump_matrices)
    try:
        if args.command == "apriori":
            cfg = ExperimentConfig("apriori", args.formulation, args.sigma, args.domain,
                                   levels=args.levels, k=args.num_eigs, **common)
            table = run_apriori(cfg)
            flag = "  (uncovered by theory)" if table.uncovered_by_theory else ""
            print(f"{table.label}{flag}")
            for name, rate in table.rates().items():
                print(f"  rate {name:16s} {rate: .3f}")
        elif args.command == "curl-failure":
            cfg = ExperimentConfig("curl-failure", "f1", "cg1vec", "lshape", levels=args.levels, **common)
            res = run_curl_failure(cfg)
            err = res.mode_errors(res.curl_rows)
            print(f"F1curl mode-1 errors: {' '.join(f'{e:.4g}' for e in err)}")
            print(f"F1/RT0 control final error: {res.control_error:.4g}")
            print(f"wrong-limit convergence detected: {res.wrong_limit}")
        elif args.command == "adaptive":
            cfg = ExperimentConfig("adaptive", "f1", "rt0", "lshape", thetas=args.theta,
                                   max_dofs=args.max_dofs, **common)
            res = run_adaptive(cfg)
            for th, n_it, ndof, err, eta, slope in res.summary_rows():
                print(f"theta={th:.2f} iterations={n_it} ndof={ndof} err={err:.3e} slope={slope:.3f}")
        elif args.command == "oracle":
            if args.max_level < 4:
                raise ValueError("the extrapolation needs five levels: use --max-level 4 or more")
            path, data = write_reference(args.out, levels=tuple(range(args.max_level - 4, args.max_level + 1)),
                                         verbose=args.verbose)
            print(f"wrote {path}")
            for j, v in enumerate(data["eigenvalues"], 1):
                print(f"  lambda_{j} = {v:.10f}")
    except ValueError as exc:
        print(f"lseig: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
