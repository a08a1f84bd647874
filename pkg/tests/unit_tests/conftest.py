#  Copyright (c) Michele De Stefano 2026.
import math
from collections.abc import Callable

import numpy as np
import pytest

from tailopt.model import ModelSpec, build_uniform_model
from tailopt.trajgen import FourierTarget
from tailopt.transcription import Grid


@pytest.fixture(scope="session")
def one_link_model() -> ModelSpec:
    return build_uniform_model(1)


@pytest.fixture(scope="session")
def three_link_model() -> ModelSpec:
    return build_uniform_model(3)


@pytest.fixture(scope="session")
def six_link_model() -> ModelSpec:
    return build_uniform_model(6)


@pytest.fixture(scope="session")
def zero_target() -> FourierTarget:
    return FourierTarget(
        a=np.zeros((3, 6)), b=np.zeros((3, 5)), omega=np.full(3, math.pi)
    )


@pytest.fixture(scope="session")
def sinusoid_target() -> FourierTarget:
    """20 deg sin(pi t) on the roll axis, rest elsewhere."""
    b = np.zeros((3, 5))
    b[0, 0] = math.radians(20.0)
    return FourierTarget(a=np.zeros((3, 6)), b=b, omega=np.full(3, math.pi))


@pytest.fixture(scope="session")
def coarse_grid() -> Grid:
    return Grid(n_intervals=10)


class QuadraticProblem:
    """
    min |z - center|^2 subject to linear constraints A_eq z = b_eq and
    A_ineq z <= b_ineq.
    """

    def __init__(
        self,
        center: np.ndarray,
        A_eq: np.ndarray | None = None,
        b_eq: np.ndarray | None = None,
        A_ineq: np.ndarray | None = None,
        b_ineq: np.ndarray | None = None,
    ) -> None:
        self.center = np.asarray(center, dtype=float)
        n = len(self.center)
        self.A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq)
        self.b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq)
        self.A_ineq = np.zeros((0, n)) if A_ineq is None else np.asarray(A_ineq)
        self.b_ineq = np.zeros(0) if b_ineq is None else np.asarray(b_ineq)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.full(self.n, -10.0), np.full(self.n, 10.0)

    def eval_objective(self, z: np.ndarray) -> float:
        d = z - self.center
        return float(d @ d)

    def eval_gradient(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * (z - self.center)

    def eval_constraints(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.A_eq @ z - self.b_eq, self.A_ineq @ z - self.b_ineq

    def eval_jacobians(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.A_eq, self.A_ineq


@pytest.fixture(scope="function")
def bounded_problem() -> QuadraticProblem:
    """min (z - 3)^2 s.t. z <= 2."""
    return QuadraticProblem(
        center=np.array([3.0]), A_ineq=np.array([[1.0]]), b_ineq=np.array([2.0])
    )


@pytest.fixture(scope="function")
def simplex_problem() -> QuadraticProblem:
    """min |z|^2 s.t. z1 + z2 + z3 = 1."""
    return QuadraticProblem(
        center=np.zeros(3), A_eq=np.ones((1, 3)), b_eq=np.array([1.0])
    )


def finite_difference(
    f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian of f at x, shape f(x).shape + x.shape."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        columns.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(columns, axis=-1)


@pytest.fixture(scope="session")
def fd() -> Callable:
    return finite_difference
