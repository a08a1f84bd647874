#  Copyright (c) Michele De Stefano 2026.
import importlib.resources
import json
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from tailopt.model import ModelSpec


@pytest.fixture(scope="session")
def resources_path() -> Path:
    return Path(str(importlib.resources.files("tests.resources")))


@pytest.fixture(scope="session")
def model_config_path(resources_path: Path) -> Path:
    """Reference model config (one vertebra, default limits)."""
    return resources_path / "model_config.json"


@pytest.fixture(scope="function")
def model_config_doc(model_config_path: Path) -> dict:
    """Parsed model config, fresh for every test so it can be edited."""
    return json.loads(model_config_path.read_text())


@pytest.fixture(scope="session")
def morphometrics_path(resources_path: Path) -> Path:
    """Caudal vertebra lengths of seven species in long format."""
    return resources_path / "morphometrics.csv"


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def random_state() -> Callable[[ModelSpec, np.random.Generator, int], tuple]:
    """
    Factory of random in-bounds (q, qdot, u) stacks. Torso pitch stays away
    from the Euler-angle singularity.
    """

    def sample(
        model: ModelSpec, rng: np.random.Generator, count: int = 1
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        limits = model.limits
        q = np.empty((count, model.n_q))
        q[:, :3] = rng.uniform(-1.0, 1.0, (count, 3))
        q[:, 3:] = rng.uniform(-limits.rom, limits.rom, (count, model.n_u))
        qdot = rng.uniform(-2.0, 2.0, (count, model.n_q))
        u = rng.uniform(-limits.torque, limits.torque, (count, model.n_u))
        return q, qdot, u

    return sample
