#  Copyright (c) Michele De Stefano - 2026.
"""
Batch experiments: optimization trials over targets and vertebra counts,
result tables and reports.
"""

import logging
import math
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import StatisticsError, TailOptError, TranscriptionError
from .model import MAX_LINKS, ModelSpec, build_uniform_model, load_model
from .morphometrics import paired_t_test
from .simulate import (
    TrialMetrics,
    compute_metrics,
    passes_validation,
    validate,
)
from .solver import SolverConfig, multistart_solve
from .trajgen import FourierTarget, gen_batch, load_targets
from .transcription import (
    MAX_VARIABLE_LINKS,
    Grid,
    Mode,
    Solution,
    build_nlp,
    interpolate_solution,
    load_solution,
    save_solution,
)

logger = logging.getLogger(__name__)

RESULTS_FILE: str = "results.csv"
SOLUTIONS_DIR: str = "solutions"

RESULT_COLUMNS: list[str] = (
    [
        "trial_id",
        "target_seed",
        "n_links",
        "mode",
        "lengths",
        "objective_rad2s",
        "tracking_error",
        "max_tip_speed_mps",
    ]
    + [f"effort_j{j}" for j in range(1, MAX_LINKS + 1)]
    + [
        "effort_saturation",
        "validation_rms_rad",
        "solver_status",
        "wall_time_s",
        "position_saturation",
        "velocity_saturation",
        "torque_saturation",
    ]
)
METRIC_COLUMNS: list[str] = (
    [
        "objective_rad2s",
        "tracking_error",
        "max_tip_speed_mps",
    ]
    + [f"effort_j{j}" for j in range(1, MAX_LINKS + 1)]
    + [
        "effort_saturation",
        "validation_rms_rad",
        "position_saturation",
        "velocity_saturation",
        "torque_saturation",
    ]
)
VALIDATION_FAILED: str = "validation_failed"
ACCEPTED_STATUSES: tuple[str, ...] = ("optimal", "feasible-stalled")


@dataclass(frozen=True)
class ExperimentPlan:
    """
    Description of a batch of optimization trials.

    Attributes:
        model_config:   Model config file, or None for the reference model.
        targets_path:   Targets CSV, or None to sample (seed, count) targets.
        seed:           Batch seed (targets and multi-start streams).
        count:          Number of targets to sample when targets_path is None.
        mode:           "uniform" or "variable".
        links:          Vertebra counts to sweep.
        out_dir:        Output directory.
        jobs:           Worker processes.
        solver:         Solver settings.
        grid:           Collocation grid.
    """

    model_config: Path | None = None
    targets_path: Path | None = None
    seed: int = 0
    count: int = 100
    mode: Mode = "uniform"
    links: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    out_dir: Path = Path("results")
    jobs: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: Grid = field(default_factory=Grid)

    def __post_init__(self) -> None:
        if self.mode not in ("uniform", "variable"):
            raise TranscriptionError(f"unknown mode {self.mode!r}")
        max_links = MAX_VARIABLE_LINKS if self.mode == "variable" else MAX_LINKS
        for n in self.links:
            if not 1 <= n <= max_links:
                raise TranscriptionError(
                    f"{self.mode} mode supports 1 to {max_links} vertebrae, "
                    f"got {n}"
                )
        for path in (self.model_config, self.targets_path):
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{path} does not exist")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")
        if self.targets_path is None and self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")

    def base_model(self) -> ModelSpec:
        if self.model_config is None:
            return build_uniform_model(1)
        return load_model(Path(self.model_config).read_text())

    def targets(self) -> list[FourierTarget]:
        if self.targets_path is not None:
            return load_targets(self.targets_path, duration=self.grid.tf)
        return gen_batch(self.seed, self.count)


@dataclass(frozen=True)
class TrialTask:
    """
    One optimization trial, self-contained so it can run in a worker
    process.
    """

    trial_id: str
    target_index: int
    target: FourierTarget
    model: ModelSpec
    mode: Mode
    grid: Grid
    solver: SolverConfig
    seed: int
    solutions_dir: Path

    @property
    def solution_path(self) -> Path:
        return self.solutions_dir / f"{self.trial_id}.csv"

    @property
    def uniform_trial_id(self) -> str:
        return trial_id("uniform", self.model.n_links, self.target_index)


def trial_id(mode: str, n_links: int, target_index: int) -> str:
    return f"{mode}-n{n_links}-t{target_index:04d}"


def trial_seed(batch_seed: int, n_links: int, target_index: int) -> int:
    """
    Multi-start seed of a trial, derived from the batch seed only, so it does
    not depend on the scheduling order.
    """
    state = np.random.SeedSequence([batch_seed, n_links, target_index])
    return int(state.generate_state(1)[0])


def make_tasks(plan: ExperimentPlan) -> list[TrialTask]:
    base = plan.base_model()
    targets = plan.targets()
    solutions_dir = Path(plan.out_dir) / SOLUTIONS_DIR
    return [
        TrialTask(
            trial_id=trial_id(plan.mode, n, i),
            target_index=i,
            target=target,
            model=base.with_links(n),
            mode=plan.mode,
            grid=plan.grid,
            solver=plan.solver,
            seed=trial_seed(plan.seed, n, i),
            solutions_dir=solutions_dir,
        )
        for n in plan.links
        for i, target in enumerate(targets)
    ]


def _uniform_solution(task: TrialTask) -> Solution:
    """
    Uniform-length solution of the same target and vertebra count, read from
    disk when present, computed (and stored) otherwise.
    """
    path = task.solutions_dir / f"{task.uniform_trial_id}.csv"
    if path.exists():
        return load_solution(path, task.model)
    nlp = build_nlp(task.model, task.target, task.grid, mode="uniform")
    solution = multistart_solve(nlp, task.seed, task.solver)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_solution(solution, path)
    return solution


def solve_trial(task: TrialTask) -> Solution:
    """
    Multi-start solve of a trial. Variable-length trials are additionally
    warm-started from the uniform-length solution.
    """
    nlp = build_nlp(task.model, task.target, task.grid, mode=task.mode)
    warm_start = None
    if task.mode == "variable":
        try:
            uniform = _uniform_solution(task)
            warm_start = nlp.pack(
                uniform.states, uniform.controls, uniform.lengths
            )
        except TailOptError as e:
            logger.warning(f"{task.trial_id}: no uniform warm start ({e})")
    return multistart_solve(nlp, task.seed, task.solver, warm_start=warm_start)


def result_row(
    task: TrialTask,
    solution: Solution | None,
    status: str,
    wall_time: float,
    metrics: TrialMetrics | None = None,
) -> dict:
    row: dict = {column: math.nan for column in RESULT_COLUMNS}
    row |= {
        "trial_id": task.trial_id,
        "target_seed": task.target_index,
        "n_links": task.model.n_links,
        "mode": task.mode,
        "solver_status": status,
        "wall_time_s": wall_time,
    }
    if solution is not None:
        row["lengths"] = ";".join(f"{v:.6f}" for v in solution.lengths)
        row["objective_rad2s"] = solution.objective
    if metrics is not None:
        row |= {
            "tracking_error": metrics.tracking_error,
            "max_tip_speed_mps": metrics.max_tip_speed,
            "effort_saturation": metrics.effort_saturation,
            "validation_rms_rad": metrics.validation_rms,
            "position_saturation": metrics.position_saturation,
            "velocity_saturation": metrics.velocity_saturation,
            "torque_saturation": metrics.torque_saturation,
        }
        for j, effort in enumerate(metrics.per_joint_effort, start=1):
            row[f"effort_j{j}"] = effort
    return row


def evaluate_solution(
    task: TrialTask, solution: Solution, wall_time: float
) -> dict:
    """
    Validates a solution by re-simulation and computes the result row.
    """
    validation_rms = validate(solution, task.model)
    metrics = compute_metrics(
        solution, task.target, task.model, validation_rms=validation_rms
    )
    status = solution.status
    if not passes_validation(validation_rms):
        logger.warning(
            f"{task.trial_id}: validation failed "
            f"(RMS {np.rad2deg(validation_rms):.3f} deg)"
        )
        status = VALIDATION_FAILED
    return result_row(task, solution, status, wall_time, metrics)


def run_trial(task: TrialTask) -> dict:
    """
    Runs a trial end to end and returns its result row. Failures are
    reported in the row (solver_status "failed: ..."), never raised.
    """
    started = time.perf_counter()
    try:
        solution = solve_trial(task)
        task.solutions_dir.mkdir(parents=True, exist_ok=True)
        save_solution(solution, task.solution_path)
        row = evaluate_solution(task, solution, time.perf_counter() - started)
    except Exception as e:  # noqa: BLE001
        if not isinstance(e, TailOptError):
            logger.exception(f"{task.trial_id}: unexpected failure")
        else:
            logger.warning(f"{task.trial_id}: {e}")
        row = result_row(
            task, None, f"failed: {e}", time.perf_counter() - started
        )
    logger.info(f"{task.trial_id}: {row['solver_status']}")
    return row


def rescore_trial(task: TrialTask) -> dict:
    """
    Result row of a trial whose solution file exists but whose row was never
    written (interrupted batch).
    """
    started = time.perf_counter()
    try:
        solution = load_solution(task.solution_path, task.model)
        return evaluate_solution(task, solution, time.perf_counter() - started)
    except Exception as e:  # noqa: BLE001
        logger.warning(f"{task.trial_id}: {e}")
        return result_row(
            task, None, f"failed: {e}", time.perf_counter() - started
        )


class ResultsWriter:
    """
    Appends result rows to the results CSV. Only the coordinating process
    writes, one row at a time.
    """

    __path: Path

    def __init__(self, path: Path) -> None:
        self.__path = path

    @property
    def path(self) -> Path:
        return self.__path

    def completed(self) -> set[str]:
        if not self.__path.exists():
            return set()
        return set(read_results(self.__path)["trial_id"])

    def append(self, row: dict) -> None:
        self.__path.parent.mkdir(parents=True, exist_ok=True)
        header = not self.__path.exists()
        pd.DataFrame([row], columns=RESULT_COLUMNS).to_csv(
            self.__path, mode="a", header=header, index=False
        )

    def sort(self) -> None:
        """Rewrites the file in trial order."""
        if self.__path.exists():
            frame = read_results(self.__path)
            frame.sort_values("trial_id").to_csv(self.__path, index=False)


def read_results(path) -> pd.DataFrame:
    """
    Reads a results CSV.

    Raises:
        ValueError: If the columns do not match the results schema.
    """
    frame = pd.read_csv(
        path, float_precision="round_trip", dtype={"lengths": str}
    )
    if list(frame.columns) != RESULT_COLUMNS:
        raise ValueError(f"{path}: not a results file (schema mismatch)")
    return frame


def run_plan(
    plan: ExperimentPlan,
    runner: Callable[[TrialTask], dict] = run_trial,
) -> pd.DataFrame:
    """
    Runs every trial of a plan that has no solution file yet, appending the
    rows to the results CSV as they complete.

    Returns:
        The complete results table of the plan's output directory.
    """
    out_dir = Path(plan.out_dir)
    writer = ResultsWriter(out_dir / RESULTS_FILE)
    done = writer.completed()
    tasks = make_tasks(plan)
    pending = []
    for task in tasks:
        if task.solution_path.exists():
            if task.trial_id not in done:
                writer.append(rescore_trial(task))
            continue
        pending.append(task)
    logger.info(
        f"{len(tasks)} trials, {len(tasks) - len(pending)} already completed"
    )
    if plan.mode == "variable" and plan.jobs > 1:
        # The uniform warm starts must exist before workers look for them.
        _prepare_uniform(pending, plan.jobs)

    if plan.jobs == 1:
        for task in pending:
            writer.append(runner(task))
    else:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            futures = [pool.submit(runner, task) for task in pending]
            for future in as_completed(futures):
                writer.append(future.result())
    writer.sort()
    if writer.path.exists():
        return read_results(writer.path)
    return pd.DataFrame(columns=RESULT_COLUMNS)


def _uniform_task(task: TrialTask) -> TrialTask:
    return TrialTask(
        trial_id=task.uniform_trial_id,
        target_index=task.target_index,
        target=task.target,
        model=task.model,
        mode="uniform",
        grid=task.grid,
        solver=task.solver,
        seed=task.seed,
        solutions_dir=task.solutions_dir,
    )


def _solve_uniform(task: TrialTask) -> None:
    task.solutions_dir.mkdir(parents=True, exist_ok=True)
    try:
        _uniform_solution(task)
    except TailOptError as e:
        logger.warning(f"{task.trial_id}: no uniform warm start ({e})")


def _prepare_uniform(tasks: Iterable[TrialTask], jobs: int) -> None:
    missing = [
        _uniform_task(t)
        for t in tasks
        if not (t.solutions_dir / f"{t.uniform_trial_id}.csv").exists()
    ]
    if not missing:
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(_solve_uniform, missing))


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------


@dataclass
class Report:
    """
    Summary of a results table.

    Attributes:
        summary:        Count, mean, quartiles of every metric per (mode,
                        n_links).
        paired:         Uniform vs variable comparison per n_links.
        improvements:   Relative improvement of the tracking error over the
                        single-vertebra configuration, per (mode, n_links).
        length_pattern: Mean optimized length per vertebra and the fraction
                        of trials where the first vertebra is the shortest and
                        the second the longest.
        plot_data:      Tidy (trial_id, mode, n_links, metric, value) table.
    """

    summary: pd.DataFrame
    paired: pd.DataFrame
    improvements: pd.DataFrame
    length_pattern: pd.DataFrame
    plot_data: pd.DataFrame


def accepted_rows(results: pd.DataFrame) -> pd.DataFrame:
    return results[results["solver_status"].isin(ACCEPTED_STATUSES)]


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """
    Per-configuration count, mean, min, quartiles and max of every metric,
    over the accepted trials.
    """
    rows = []
    accepted = accepted_rows(results)
    for (mode, n_links), group in accepted.groupby(["mode", "n_links"]):
        for metric in METRIC_COLUMNS:
            values = group[metric].dropna()
            if values.empty:
                continue
            rows.append(
                {
                    "mode": mode,
                    "n_links": int(n_links),
                    "metric": metric,
                    "count": int(values.size),
                    "mean": values.mean(),
                    "min": values.min(),
                    "q1": values.quantile(0.25),
                    "median": values.quantile(0.5),
                    "q3": values.quantile(0.75),
                    "max": values.max(),
                }
            )
    return pd.DataFrame(
        rows,
        columns=[
            "mode",
            "n_links",
            "metric",
            "count",
            "mean",
            "min",
            "q1",
            "median",
            "q3",
            "max",
        ],
    )


def compare_modes(results: pd.DataFrame) -> pd.DataFrame:
    """
    Paired comparison of the tracking error of uniform and variable-length
    solutions of the same targets.
    """
    accepted = accepted_rows(results)
    uniform = accepted[accepted["mode"] == "uniform"]
    variable = accepted[accepted["mode"] == "variable"]
    pairs = uniform.merge(
        variable, on=["n_links", "target_seed"], suffixes=("_u", "_v")
    )
    rows = []
    for n_links, group in pairs.groupby("n_links"):
        u = group["tracking_error_u"].to_numpy()
        v = group["tracking_error_v"].to_numpy()
        row = {
            "n_links": int(n_links),
            "pairs": int(len(group)),
            "mean_uniform": float(np.mean(u)),
            "mean_variable": float(np.mean(v)),
            "mean_improvement": float(np.mean((u - v) / u)),
            "t": math.nan,
            "df": math.nan,
            "p": math.nan,
        }
        try:
            test = paired_t_test(u, v)
            row |= {"t": test.t, "df": test.df, "p": test.p}
        except StatisticsError as e:
            logger.warning(f"n = {n_links}: no paired test ({e})")
        rows.append(row)
    return pd.DataFrame(
        rows,
        columns=[
            "n_links",
            "pairs",
            "mean_uniform",
            "mean_variable",
            "mean_improvement",
            "t",
            "df",
            "p",
        ],
    )


def improvements(results: pd.DataFrame) -> pd.DataFrame:
    """
    Relative improvement of the median and mean tracking error of every
    configuration over the single-vertebra one of the same mode.
    """
    accepted = accepted_rows(results)
    rows = []
    for mode, by_mode in accepted.groupby("mode"):
        stats = by_mode.groupby("n_links")["tracking_error"].agg(
            ["median", "mean"]
        )
        if 1 not in stats.index:
            continue
        base = stats.loc[1]
        for n_links, values in stats.iterrows():
            rows.append(
                {
                    "mode": mode,
                    "n_links": int(n_links),
                    "median_improvement": 1.0
                    - values["median"] / base["median"],
                    "mean_improvement": 1.0 - values["mean"] / base["mean"],
                }
            )
    return pd.DataFrame(
        rows,
        columns=[
            "mode",
            "n_links",
            "median_improvement",
            "mean_improvement",
        ],
    )


def parse_lengths(text: str) -> list[float]:
    return [float(v) for v in str(text).split(";")]


def length_pattern(results: pd.DataFrame) -> pd.DataFrame:
    """
    Optimized vertebral length pattern of the variable-length trials.
    """
    accepted = accepted_rows(results)
    variable = accepted[accepted["mode"] == "variable"]
    rows = []
    for n_links, group in variable.groupby("n_links"):
        lengths = np.array([parse_lengths(v) for v in group["lengths"]])
        row = {
            "n_links": int(n_links),
            "trials": int(len(group)),
            "first_shortest": float(np.mean(np.argmin(lengths, axis=1) == 0)),
            "second_longest": (
                float(np.mean(np.argmax(lengths, axis=1) == 1))
                if n_links > 1
                else math.nan
            ),
        }
        for j, mean in enumerate(lengths.mean(axis=0), start=1):
            row[f"mean_l{j}"] = float(mean)
        rows.append(row)
    return pd.DataFrame(rows)


def plot_data(results: pd.DataFrame) -> pd.DataFrame:
    accepted = accepted_rows(results)
    tidy = accepted.melt(
        id_vars=["trial_id", "mode", "n_links"],
        value_vars=METRIC_COLUMNS,
        var_name="metric",
        value_name="value",
    ).dropna(subset=["value"])
    tidy = tidy.sort_values(["metric", "mode", "n_links", "trial_id"])
    return tidy.reset_index(drop=True)


def constraint_history(
    solution: Solution, model: ModelSpec, trial: str
) -> pd.DataFrame:
    """
    Per-sample tail joint angles, velocities, torques and total effort of a
    solution, in tidy form (one row per sample and tail DOF).
    """
    grid = solution.grid
    times = grid.sample_times
    states, controls = interpolate_solution(solution, times)
    n_q = model.n_q
    effort = np.sum(controls**2, axis=1)
    frames = []
    for dof in range(model.n_u):
        frames.append(
            pd.DataFrame(
                {
                    "trial_id": trial,
                    "t": times,
                    "dof": dof,
                    "angle_rad": states[:, 3 + dof],
                    "velocity_rad_s": states[:, n_q + 3 + dof],
                    "torque_nm": controls[:, dof],
                    "effort": effort,
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def report(results: pd.DataFrame) -> Report:
    """
    Builds the report of a results table.

    Raises:
        ValueError: If the table holds no accepted trial.
    """
    if accepted_rows(results).empty:
        raise ValueError("the results hold no accepted trial")
    return Report(
        summary=summarize(results),
        paired=compare_modes(results),
        improvements=improvements(results),
        length_pattern=length_pattern(results),
        plot_data=plot_data(results),
    )


def write_report(
    rep: Report,
    out_dir: Path,
    histories: Sequence[pd.DataFrame] = (),
) -> list[Path]:
    """
    Writes the report tables as CSV files.

    Returns:
        The written files.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {
        "summary.csv": rep.summary,
        "paired.csv": rep.paired,
        "improvements.csv": rep.improvements,
        "length_pattern.csv": rep.length_pattern,
        "plot_data.csv": rep.plot_data,
    }
    if histories:
        tables["constraint_history.csv"] = pd.concat(
            histories, ignore_index=True
        )
    written = []
    for name, table in tables.items():
        path = out_dir / name
        table.to_csv(path, index=False)
        written.append(path)
    return written


def load_histories(
    results: pd.DataFrame, solutions_dir: Path, base: ModelSpec
) -> list[pd.DataFrame]:
    """
    Constraint histories of the accepted trials whose solution file is
    available. Missing files are skipped with a warning.
    """
    histories = []
    for row in accepted_rows(results).itertuples(index=False):
        path = Path(solutions_dir) / f"{row.trial_id}.csv"
        if not path.exists():
            logger.warning(f"{row.trial_id}: solution file missing")
            continue
        model = base.with_links(int(row.n_links))
        solution = load_solution(path, model)
        histories.append(constraint_history(solution, model, row.trial_id))
    return histories
