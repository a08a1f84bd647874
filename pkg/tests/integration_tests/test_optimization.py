#  Copyright (c) Michele De Stefano - 2026.
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from tailopt.cli import main
from tailopt.experiment import RESULTS_FILE, accepted_rows, read_results
from tailopt.model import build_uniform_model
from tailopt.simulate import passes_validation, validate
from tailopt.solver import multistart_solve
from tailopt.trajgen import FourierTarget
from tailopt.transcription import (
    Grid,
    NlpProblem,
    Solution,
    build_nlp,
    tracking_error,
)


def test_trial_is_feasible(solved_trial: tuple[NlpProblem, Solution]) -> None:
    # given
    nlp, solution = solved_trial
    at_rest = tracking_error(
        nlp.grid, nlp.target, np.zeros_like(solution.states)
    )

    # then
    assert solution.is_feasible
    assert solution.constraint_violation <= 1e-6
    assert solution.objective < at_rest
    assert len(solution.starts) == 5


def test_trial_respects_limits(
    solved_trial: tuple[NlpProblem, Solution],
) -> None:
    # given
    nlp, solution = solved_trial
    lower, upper = nlp.bounds
    z = nlp.pack(solution.states, solution.controls, solution.lengths)

    # then
    assert np.all(z >= lower - 1e-9)
    assert np.all(z <= upper + 1e-9)
    np.testing.assert_allclose(solution.states[0], 0.0, atol=1e-9)


def test_trial_rollout_is_finite(
    solved_trial: tuple[NlpProblem, Solution],
) -> None:
    # given
    nlp, solution = solved_trial

    # when
    rms = validate(solution, nlp.model)

    # then
    assert np.isfinite(rms)


@pytest.mark.slow
def test_full_resolution_trial_passes_validation(
    pitch_target: FourierTarget,
) -> None:
    # given
    nlp = build_nlp(build_uniform_model(2), pitch_target, Grid())

    # when
    solution = multistart_solve(nlp, seed=0)

    # then
    assert solution.is_feasible
    assert passes_validation(validate(solution, nlp.model))


@pytest.mark.slow
def test_batch_pipeline(batch_dir: Path) -> None:
    # given
    targets = batch_dir / "targets.csv"
    common = ["--targets", str(targets), "--dt", "0.02", "--jobs", "1"]
    common += ["--out", str(batch_dir)]

    # when
    assert main(["gen-targets", "--count", "2", "--out", str(targets)]) == 0
    assert main(["optimize", "--links", "1,2"] + common) == 0
    assert main(["optimize-lengths", "--links", "2"] + common) == 0
    assert main(["report", str(batch_dir / RESULTS_FILE)]) == 0

    # then
    results = read_results(batch_dir / RESULTS_FILE)
    assert len(results) == 6
    accepted = accepted_rows(results)
    by_key = accepted.set_index(["mode", "n_links", "target_seed"])
    for seed in range(2):
        uniform = ("uniform", 2, seed)
        variable = ("variable", 2, seed)
        if uniform in by_key.index and variable in by_key.index:
            assert by_key.loc[variable, "objective_rad2s"] <= (
                by_key.loc[uniform, "objective_rad2s"] + 1e-6
            )
    paired = pd.read_csv(batch_dir / "report" / "paired.csv")
    assert set(paired["n_links"]) <= {2}
