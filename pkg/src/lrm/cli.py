"""``bench`` command line: run sweeps, decompose a workload, generate workloads.

Exit status is 0 on success, 1 on a fatal error and 2 when the plan or the
arguments are invalid.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import __version__
from .bench import PlanError, emit_csv, load_plan, run_plan
from .linalg import load_matrix, save_matrix
from .solver import SolverConfig, decompose
from .workload import FAMILIES, WorkloadSpec, generate

log = logging.getLogger("lrm")

EXIT_OK, EXIT_FATAL, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bench", description="Differentially private linear-query benchmarks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment plan and write a CSV")
    run.add_argument("--plan", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None, help="master seed (overrides the plan)")
    run.add_argument("--stable-output", action="store_true", help="zero the timing column")
    run.add_argument("--full", action="store_true", help="allow the full-scale grid (slow)")

    dec = sub.add_parser("decompose", help="decompose a workload matrix file")
    dec.add_argument("--workload", required=True)
    dec.add_argument("--r", type=int, default=None)
    dec.add_argument("--gamma", type=float, default=SolverConfig.gamma)
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--out", required=True)

    gen = sub.add_parser("gen", help="generate a workload matrix file")
    gen.add_argument("--family", required=True, choices=FAMILIES)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--s", type=int, default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    plan = load_plan(args.plan, full=args.full)
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    emit_csv(run_plan(plan), args.out, stable=args.stable_output)
    return EXIT_OK


def _cmd_decompose(args) -> int:
    w = load_matrix(args.workload)
    try:
        cfg = SolverConfig(r=args.r, gamma=args.gamma, seed=args.seed)
    except ValueError as exc:
        raise PlanError(str(exc)) from None
    dec, trace = decompose(w, cfg)
    dec.save(args.out)
    print(
        f"r={dec.r} residual={dec.residual:.6g} max_col_l1={dec.max_col_l1:.12g} "
        f"outer={trace.outer_iterations} {trace.termination}"
    )
    return EXIT_OK


def _cmd_gen(args) -> int:
    try:
        spec = WorkloadSpec(args.family, args.m, args.n, args.s, args.seed)
    except ValueError as exc:
        raise PlanError(str(exc)) from None
    save_matrix(generate(spec), args.out)
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "decompose": _cmd_decompose, "gen": _cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except PlanError as exc:
        print(f"bench: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
