"""Command-line entry point: ``guided-es run | surface | regimes``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import harness
from .types import ConfigError


def parse_seeds(text: str) -> tuple:
    """``"0..9"`` (inclusive range), ``"1,4,7"`` or a single integer."""
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return tuple(seeds)


def _problem_override(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    for cast in (int, float):
        try:
            return key, cast(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return key, value.lower() == "true"
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guided-es", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment and write aggregate CSV")
    run.add_argument("--experiment", required=True, choices=harness.RUNNABLE)
    run.add_argument("--algorithm", required=True, choices=harness.ALGORITHMS)
    run.add_argument("--seeds", type=parse_seeds, default=tuple(range(10)))
    run.add_argument("--iterations", type=int)
    run.add_argument("--lr", type=float, dest="learning_rate")
    run.add_argument("--alpha", type=float, default=0.5)
    run.add_argument("--beta", type=float, default=2.0)
    run.add_argument("--sigma", type=float)
    run.add_argument("--pairs", type=int)
    run.add_argument("--subspace-dim", type=int)
    run.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd",
                     help="optimizer for ES updates (adam_surrogate always uses Adam)")
    run.add_argument("--problem", type=_problem_override, action="append", default=[],
                     metavar="KEY=VALUE", help="problem constructor override")
    run.add_argument("--threads", type=int,
                     help=f"worker threads (default: ${harness.THREADS_ENV} or CPU count)")
    run.add_argument("--out", required=True)

    surface = sub.add_parser("surface", help="bias/variance surface over (alpha, beta)")
    surface.add_argument("--k", type=int, required=True)
    surface.add_argument("--n", type=int, required=True)
    surface.add_argument("--rho", type=float, required=True)
    surface.add_argument("--grid", type=int, default=400)
    surface.add_argument("--beta-max", type=float, default=4.0)
    surface.add_argument("--out", required=True)

    regimes = sub.add_parser("regimes", help="optimal (alpha, beta) over k/n and rho")
    regimes.add_argument("--n", type=int, required=True)
    regimes.add_argument("--rho-grid", type=int, default=201)
    regimes.add_argument("--out", required=True)
    return parser


def _run(args) -> int:
    spec = harness.ExperimentSpec(
        args.experiment, args.algorithm, args.seeds, args.iterations,
        args.learning_rate, args.alpha, args.beta, args.sigma, args.pairs,
        args.subspace_dim, args.optimizer, dict(args.problem),
    ).resolved()
    streams = harness.run_experiment(spec, args.threads)
    result = harness.aggregate(streams)
    if result.failed_seeds:
        print(f"warning: seeds {result.failed_seeds} diverged and were excluded",
              file=sys.stderr)
    harness.emit_csv(result, args.out, spec)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "surface":
            harness.emit_surface(args.k, args.n, args.rho, args.grid, args.out,
                                 args.beta_max)
        else:
            harness.emit_regimes(args.n, args.out, args.rho_grid)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
