#  Copyright (c) Michele De Stefano - 2026.
"""
Command-line driver: target generation, optimization batches, validation of
stored solutions, reports and vertebral morphometrics.
"""

import argparse
import dataclasses
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import TailOptError
from .experiment import (
    RESULTS_FILE,
    SOLUTIONS_DIR,
    VALIDATION_FAILED,
    ExperimentPlan,
    load_histories,
    read_results,
    report,
    run_plan,
    write_report,
)
from .model import MAX_LINKS, build_uniform_model, load_model
from .morphometrics import compare_groups, load_series
from .simulate import passes_validation, rollout, solution_control, validate
from .solver import SolverConfig
from .trajgen import gen_batch, save_targets
from .transcription import (
    DEFAULT_STEP,
    MAX_VARIABLE_LINKS,
    Grid,
    load_solution,
    read_solution_header,
)

logger = logging.getLogger(__name__)

JOBS_ENV: str = "TAILOPT_JOBS"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _links(text: str) -> tuple[int, ...]:
    try:
        links = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated list of integers, got {text!r}"
        ) from None
    return links


def _default_jobs() -> int:
    text = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(text))
    except ValueError:
        logger.warning(f"ignoring {JOBS_ENV}={text!r}")
        return 1


def _add_batch_arguments(
    parser: argparse.ArgumentParser, default_links: str
) -> None:
    parser.add_argument(
        "--config",
        dest="config",
        type=Path,
        default=None,
        help="Model config file (JSON). Default: reference model.",
    )
    parser.add_argument(
        "--targets",
        dest="targets",
        type=Path,
        default=None,
        help="Targets CSV written by gen-targets. "
        "Default: sample --count targets from --seed.",
    )
    parser.add_argument(
        "--seed",
        dest="seed",
        type=int,
        default=0,
        help="Batch seed. Default: %(default)s.",
    )
    parser.add_argument(
        "--count",
        dest="count",
        type=_positive_int,
        default=100,
        help="Number of sampled targets. Default: %(default)s.",
    )
    parser.add_argument(
        "--links",
        dest="links",
        type=_links,
        default=_links(default_links),
        help=f"Comma-separated vertebra counts. Default: {default_links}.",
    )
    parser.add_argument(
        "--out",
        dest="out",
        type=Path,
        default=Path("results"),
        help="Output directory. Default: %(default)s.",
    )
    parser.add_argument(
        "--jobs",
        dest="jobs",
        type=_positive_int,
        default=_default_jobs(),
        help=f"Worker processes (environment: {JOBS_ENV}). "
        "Default: %(default)s.",
    )
    parser.add_argument(
        "--solver-tol",
        dest="solver_tol",
        type=_positive_float,
        default=None,
        help="Feasibility and optimality tolerance. Default: "
        f"{SolverConfig.feasibility_tol}.",
    )
    parser.add_argument(
        "--max-iter",
        dest="max_iter",
        type=_positive_int,
        default=None,
        help=f"Iteration budget per start. Default: {SolverConfig.max_iter}.",
    )
    parser.add_argument(
        "--dt",
        dest="dt",
        type=_positive_float,
        default=DEFAULT_STEP,
        help="Collocation step, s (rounded to divide the horizon). "
        "Default: %(default)s.",
    )
    parser.add_argument(
        "--backend",
        dest="backend",
        choices=("auglag", "trust-constr"),
        default="auglag",
        help="NLP solver. Default: %(default)s.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailopt",
        description="Trajectory optimization of multi-vertebra tails for "
        "inertial torso reorientation",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        dest="verbose",
        action="count",
        default=0,
        help="INFO logging, DEBUG when repeated.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-targets", help="Sample target trajectories.")
    gen.add_argument("--seed", dest="seed", type=int, default=0)
    gen.add_argument("--count", dest="count", type=_positive_int, default=100)
    gen.add_argument(
        "--out",
        dest="out",
        type=Path,
        default=Path("targets.csv"),
        help="Targets CSV. Default: %(default)s.",
    )
    gen.set_defaults(handler=cmd_gen_targets)

    optimize = commands.add_parser(
        "optimize", help="Optimize trials over targets and vertebra counts."
    )
    _add_batch_arguments(optimize, "1,2,3,4,5,6")
    optimize.add_argument(
        "--mode",
        dest="mode",
        choices=("uniform", "variable"),
        default="uniform",
        help="Vertebral lengths. Default: %(default)s.",
    )
    optimize.set_defaults(handler=cmd_optimize)

    lengths = commands.add_parser(
        "optimize-lengths",
        help="Optimize trials with variable vertebral lengths, warm-started "
        "from the uniform solutions found in the same output directory.",
    )
    _add_batch_arguments(lengths, "1,2,3,4")
    lengths.set_defaults(handler=cmd_optimize, mode="variable")

    simulate = commands.add_parser(
        "simulate", help="Re-simulate a stored solution and validate it."
    )
    simulate.add_argument("solution", type=Path, help="Solution file.")
    simulate.add_argument("--config", dest="config", type=Path, default=None)
    simulate.add_argument(
        "--out",
        dest="out",
        type=Path,
        default=None,
        help="Optional CSV of the simulated knot states.",
    )
    simulate.set_defaults(handler=cmd_simulate)

    rep = commands.add_parser("report", help="Summarize a results CSV.")
    rep.add_argument("results", type=Path, help="Results CSV.")
    rep.add_argument(
        "--out",
        dest="out",
        type=Path,
        default=None,
        help="Report directory. Default: <results dir>/report.",
    )
    rep.add_argument(
        "--config",
        dest="config",
        type=Path,
        default=None,
        help="Model config, for the constraint histories.",
    )
    rep.set_defaults(handler=cmd_report)

    morpho = commands.add_parser(
        "morpho", help="Compare vertebral length patterns of two groups."
    )
    morpho.add_argument("csv", type=Path, help="Morphometrics CSV.")
    morpho.add_argument(
        "--out",
        dest="out",
        type=Path,
        default=None,
        help="Optional CSV of the per-species statistics.",
    )
    morpho.set_defaults(handler=cmd_morpho)
    return parser


def _base_model(config: Path | None):
    if config is None:
        return build_uniform_model(1)
    return load_model(config.read_text())


def cmd_gen_targets(args: argparse.Namespace) -> int:
    targets = gen_batch(args.seed, args.count)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_targets(targets, args.out)
    print(f"{len(targets)} targets written to {args.out}")
    return 0


def make_plan(args: argparse.Namespace) -> ExperimentPlan:
    solver = SolverConfig(backend=args.backend)
    if args.solver_tol is not None:
        solver = dataclasses.replace(
            solver,
            feasibility_tol=args.solver_tol,
            optimality_tol=args.solver_tol,
        )
    if args.max_iter is not None:
        solver = dataclasses.replace(solver, max_iter=args.max_iter)
    return ExperimentPlan(
        model_config=args.config,
        targets_path=args.targets,
        seed=args.seed,
        count=args.count,
        mode=args.mode,
        links=args.links,
        out_dir=args.out,
        jobs=args.jobs,
        solver=solver,
        grid=Grid.from_step(args.dt, strict=False),
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    plan = make_plan(args)
    results = run_plan(plan)
    mine = results[
        (results["mode"] == plan.mode) & results["n_links"].isin(plan.links)
    ]
    failed = mine["solver_status"].str.startswith("failed") | (
        mine["solver_status"] == VALIDATION_FAILED
    )
    print(
        f"{len(mine)} trials, {int(failed.sum())} failed; results in "
        f"{Path(plan.out_dir) / RESULTS_FILE}"
    )
    if len(mine) > 0 and bool(failed.all()):
        print("every trial failed", file=sys.stderr)
        return 1
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    header = read_solution_header(args.solution)
    n_links = int(header["n_links"])
    if not 1 <= n_links <= MAX_LINKS:
        raise ValueError(f"{args.solution}: invalid n_links {n_links}")
    model = _base_model(args.config).with_links(n_links)
    solution = load_solution(args.solution, model)
    rms = validate(solution, model)
    passed = passes_validation(rms)
    print(
        f"validation RMS: {np.rad2deg(rms):.4f} deg "
        f"({'passed' if passed else 'failed'})"
    )
    if args.out is not None:
        grid = solution.grid
        sim = rollout(
            model,
            solution_control(solution),
            solution.states[0],
            grid.tf,
            t_eval=grid.knot_times,
            lengths=solution.lengths,
            t0=grid.t0,
        )
        n_q = model.n_q
        frame = pd.DataFrame(
            np.column_stack([sim.t, sim.states]),
            columns=["t"]
            + [f"q{i}" for i in range(n_q)]
            + [f"qd{i}" for i in range(n_q)],
        )
        frame.to_csv(args.out, index=False)
    return 0 if passed else 1


def cmd_report(args: argparse.Namespace) -> int:
    results = read_results(args.results)
    rep = report(results)
    out_dir = args.out or args.results.parent / "report"
    solutions_dir = args.results.parent / SOLUTIONS_DIR
    histories = []
    if solutions_dir.is_dir():
        histories = load_histories(
            results, solutions_dir, _base_model(args.config)
        )
    written = write_report(rep, out_dir, histories)
    with pd.option_context("display.width", 120, "display.max_rows", 200):
        print(rep.summary[rep.summary["metric"] == "tracking_error"])
        if not rep.improvements.empty:
            print(rep.improvements)
        if not rep.paired.empty:
            print(rep.paired)
    for path in written:
        logger.info(f"written {path}")
    return 0


def cmd_morpho(args: argparse.Namespace) -> int:
    comparison = compare_groups(load_series(args.csv))
    for group, mean in comparison.group_means.items():
        print(f"{group}: mean max neighbor difference {mean:.4f}")
    test = comparison.test
    print(f"Welch t = {test.t:.4f}, df = {test.df:.3f}, p = {test.p:.3g}")
    if args.out is not None:
        comparison.statistics.to_csv(args.out, index=False)
    return 0


def configure_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    if (
        getattr(args, "mode", None) == "variable"
        and max(args.links) > MAX_VARIABLE_LINKS
    ):
        parser.error(
            f"variable lengths support 1 to {MAX_VARIABLE_LINKS} vertebrae"
        )
    try:
        return args.handler(args)
    except (TailOptError, ValueError, FileNotFoundError) as e:
        print(f"tailopt: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
