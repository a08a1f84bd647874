#  Copyright (c) Michele De Stefano - 2026.
import math
from pathlib import Path

import numpy as np
import pytest

from tailopt.model import ModelSpec, build_uniform_model
from tailopt.solver import multistart_solve
from tailopt.trajgen import FourierTarget
from tailopt.transcription import Grid, NlpProblem, Solution, build_nlp


@pytest.fixture(scope="session")
def three_link_model() -> ModelSpec:
    return build_uniform_model(3)


@pytest.fixture(scope="session")
def pitch_target() -> FourierTarget:
    """20 deg sin(pi t) on the pitch axis."""
    b = np.zeros((3, 5))
    b[1, 0] = math.radians(20.0)
    return FourierTarget(a=np.zeros((3, 6)), b=b, omega=np.full(3, math.pi))


@pytest.fixture(scope="session")
def solved_trial(
    pitch_target: FourierTarget,
) -> tuple[NlpProblem, Solution]:
    """Single-vertebra trial on a coarse grid, solved from every start."""
    nlp = build_nlp(build_uniform_model(1), pitch_target, Grid(n_intervals=10))
    return nlp, multistart_solve(nlp, seed=0)


@pytest.fixture(scope="session")
def batch_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    return tmp_path_factory.mktemp("batch")
