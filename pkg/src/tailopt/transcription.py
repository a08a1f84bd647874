#  Copyright (c) Michele De Stefano - 2026.
"""
Hermite-Simpson direct collocation of the tail trajectory-optimization
problem.

The transcription is the compressed form: decision variables are the states
at the knots, the controls at knots and interval midpoints and, when the
vertebral lengths are optimized, the lengths. Midpoint states are computed
from the cubic Hermite interpolant. Layout of the decision vector z:

    [x_0, ..., x_N, u_0, u_1/2, u_1, ..., u_N, (l_1, ..., l_n)]

with x = (q, qdot), so controls at even sample indexes sit on the knots and
at odd indexes on the midpoints.
"""

import io
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Literal, Protocol

import numpy as np
import pandas as pd
import scipy.sparse

from .collision import SphereLayout, collision_jacobian, collision_values
from .collision import default_layout as default_sphere_layout
from .dynamics import DynamicsEvaluation, chain_dynamics
from .errors import HorizonError, TranscriptionError, check_finite
from .model import LENGTH_LOWER_BOUND, ModelSpec
from .trajgen import DURATION, FourierTarget

logger = logging.getLogger(__name__)

Mode = Literal["uniform", "variable"]

DEFAULT_STEP: float = 0.004  # s
MAX_VARIABLE_LINKS: int = 4
# Relative mismatch tolerated between N * dt and the horizon.
GRID_RTOL: float = 1e-9

_SNAP: float = 1e-9


@dataclass(frozen=True)
class Grid:
    """
    Uniform collocation grid.

    Attributes:
        t0:             Initial time, s.
        tf:             Final time, s.
        n_intervals:    Number of intervals N.
    """

    t0: float = 0.0
    tf: float = DURATION
    n_intervals: int = round(DURATION / DEFAULT_STEP)

    def __post_init__(self) -> None:
        if self.n_intervals < 1:
            raise TranscriptionError(
                f"the grid needs at least one interval, got {self.n_intervals}"
            )
        if not self.tf > self.t0:
            raise TranscriptionError(
                f"final time {self.tf} is not after initial time {self.t0}"
            )

    @classmethod
    def from_step(
        cls,
        dt: float = DEFAULT_STEP,
        t0: float = 0.0,
        tf: float = DURATION,
        strict: bool = True,
    ) -> "Grid":
        """
        Grid with step dt. With strict=True the step must divide the horizon;
        otherwise the interval count is rounded and the step adjusted.

        Raises:
            TranscriptionError: Inconsistent step.
        """
        if not dt > 0.0:
            raise TranscriptionError(f"time step must be positive, got {dt}")
        exact = (tf - t0) / dt
        n = max(1, round(exact))
        if strict and not math.isclose(n, exact, rel_tol=GRID_RTOL):
            raise TranscriptionError(
                f"step {dt} s does not divide the horizon [{t0}, {tf}] s"
            )
        return cls(t0=t0, tf=tf, n_intervals=n)

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.n_intervals

    @property
    def knot_times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_intervals + 1)

    @property
    def mid_times(self) -> np.ndarray:
        knots = self.knot_times
        return 0.5 * (knots[:-1] + knots[1:])

    @property
    def sample_times(self) -> np.ndarray:
        """Knots and midpoints interleaved, 2N + 1 values."""
        out = np.empty(2 * self.n_intervals + 1)
        out[0::2] = self.knot_times
        out[1::2] = self.mid_times
        return out


class Dynamics(Protocol):
    """
    What the transcription needs from a dynamics engine.
    """

    def evaluate(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        u: np.ndarray,
        lengths: Sequence[float] | None = None,
        derivatives: bool = False,
        length_derivatives: bool = False,
    ) -> DynamicsEvaluation: ...


@dataclass
class Solution:
    """
    Optimized trajectory.

    Attributes:
        mode:                   "uniform" or "variable".
        grid:                   The collocation grid.
        states:                 (N + 1, 2 n_q) knot states.
        controls:               (2N + 1, n_u) knot and midpoint controls.
        state_derivatives:      (N + 1, 2 n_q) dynamics at the knots, used by
                                the cubic state interpolant.
        lengths:                Vertebral lengths, m.
        objective:              Tracking objective, rad^2 s.
        status:                 One of optimal, feasible-stalled,
                                infeasible, iteration-limit.
        iterations:             Iterations taken by the solver.
        constraint_violation:   Max-norm of the constraint violation.
        kkt_residual:           Max-norm of the Lagrangian gradient (projected
                                on the bounds), when known.
        starts:                 Per-start outcomes of a multi-start solve.
    """

    mode: Mode
    grid: Grid
    states: np.ndarray
    controls: np.ndarray
    state_derivatives: np.ndarray
    lengths: tuple[float, ...]
    objective: float
    status: str
    iterations: int = 0
    constraint_violation: float = 0.0
    kkt_residual: float = math.nan
    starts: list[dict] = field(default_factory=list)

    @property
    def n_q(self) -> int:
        return self.states.shape[1] // 2

    @property
    def n_links(self) -> int:
        return len(self.lengths)

    @property
    def is_feasible(self) -> bool:
        return self.status in ("optimal", "feasible-stalled")


class NlpProblem:
    """
    Nonlinear program of one trial: tracking objective, Hermite-Simpson
    defects and path constraints, with analytic sparse Jacobians.

    Constraints are split into equalities c_eq(z) = 0 and inequalities
    c_ineq(z) <= 0. Variable bounds (state and input bounds, fixed initial
    state, length bounds) are returned separately by bounds.
    """

    __model: ModelSpec
    __target: FourierTarget
    __grid: Grid
    __mode: Mode
    __layout: SphereLayout
    __dynamics: Dynamics
    __target_knots: np.ndarray
    __target_mids: np.ndarray
    __cache_key: bytes | None
    __cache: dict

    def __init__(
        self,
        model: ModelSpec,
        target: FourierTarget,
        grid: Grid | None = None,
        mode: Mode = "uniform",
        layout: SphereLayout | None = None,
        dynamics: Dynamics | None = None,
    ) -> None:
        """
        Constructor.

        Args:
            model:      The model. In variable mode it is the template that
                        fixes the vertebrae count, density and cross section.
            target:     Target torso orientation.
            grid:       Collocation grid. Defaults to dt = 0.004 s over the
                        target horizon.
            mode:       "uniform" (fixed lengths) or "variable" (lengths are
                        decision variables).
            layout:     Collision spheres. Defaults to default_layout(model).
            dynamics:   Dynamics engine. Defaults to the rigid-body chain of
                        the model.

        Raises:
            TranscriptionError: Unsupported mode, link count or grid.
        """
        if mode not in ("uniform", "variable"):
            raise TranscriptionError(f"unknown mode {mode!r}")
        if mode == "variable" and model.n_links > MAX_VARIABLE_LINKS:
            raise TranscriptionError(
                f"variable lengths support 1 to {MAX_VARIABLE_LINKS} "
                f"vertebrae, got {model.n_links}"
            )
        grid = grid or Grid.from_step(DEFAULT_STEP, tf=target.duration)
        if grid.t0 < 0.0 or grid.tf > target.duration * (1.0 + GRID_RTOL):
            raise TranscriptionError(
                f"grid [{grid.t0}, {grid.tf}] s exceeds the target horizon "
                f"{target.duration} s"
            )
        self.__model = model
        self.__target = target
        self.__grid = grid
        self.__mode = mode
        self.__layout = layout or default_sphere_layout(model)
        self.__dynamics = dynamics or chain_dynamics(model)
        self.__target_knots, _ = target.evaluate(grid.knot_times)
        self.__target_mids, _ = target.evaluate(grid.mid_times)
        self.__cache_key = None
        self.__cache = {}
        logger.debug(
            f"NLP ({mode}, {model.n_links} links): {self.n} variables, "
            f"{self.n_eq} equalities, {self.n_ineq} inequalities"
        )

    # ------------------------------------------------------------------
    # Sizes and layout
    # ------------------------------------------------------------------

    @property
    def model(self) -> ModelSpec:
        return self.__model

    @property
    def target(self) -> FourierTarget:
        return self.__target

    @property
    def grid(self) -> Grid:
        return self.__grid

    @property
    def mode(self) -> Mode:
        return self.__mode

    @property
    def layout(self) -> SphereLayout:
        return self.__layout

    @property
    def n_x(self) -> int:
        return 2 * self.__model.n_q

    @property
    def n_u(self) -> int:
        return self.__model.n_u

    @property
    def n_lengths(self) -> int:
        return self.__model.n_links if self.__mode == "variable" else 0

    @property
    def n_states(self) -> int:
        return (self.__grid.n_intervals + 1) * self.n_x

    @property
    def n_controls(self) -> int:
        return (2 * self.__grid.n_intervals + 1) * self.n_u

    @property
    def n(self) -> int:
        """Number of decision variables."""
        return self.n_states + self.n_controls + self.n_lengths

    @property
    def n_eq(self) -> int:
        return self.__grid.n_intervals * self.n_x + (
            1 if self.__mode == "variable" else 0
        )

    @property
    def n_ineq(self) -> int:
        N = self.__grid.n_intervals
        return (
            (2 * N + 1)
            + 2 * (2 * N) * self.n_u
            + (N + 1) * self.__layout.n_pairs
            + self.n_lengths
        )

    def unpack(
        self, z: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Splits a decision vector into (states, controls, lengths) with
        shapes (N + 1, n_x), (2N + 1, n_u) and (n_links,). In uniform mode
        the lengths are the model ones.
        """
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise TranscriptionError(
                f"decision vector must have shape ({self.n},), got {z.shape}"
            )
        X = z[: self.n_states].reshape(-1, self.n_x)
        U = z[self.n_states : self.n_states + self.n_controls].reshape(
            -1, self.n_u
        )
        if self.__mode == "variable":
            L = z[self.n_states + self.n_controls :]
        else:
            L = np.asarray(self.__model.link_lengths, dtype=float)
        return X, U, L

    def pack(
        self,
        states: np.ndarray,
        controls: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Inverse of unpack. Lengths are ignored in uniform mode and default to
        the model lengths in variable mode.
        """
        parts = [
            np.asarray(states, dtype=float).ravel(),
            np.asarray(controls, dtype=float).ravel(),
        ]
        if self.__mode == "variable":
            L = self.__model.link_lengths if lengths is None else lengths
            parts.append(np.asarray(L, dtype=float))
        z = np.concatenate(parts)
        if z.shape != (self.n,):
            raise TranscriptionError(
                f"packed vector has {z.size} entries, expected {self.n}"
            )
        return z

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Lower and upper variable bounds. The initial state is fixed at rest
        through equal bounds.
        """
        model = self.__model
        limits = model.limits
        n_q = model.n_q
        x_ub = np.empty(self.n_x)
        x_ub[:3] = limits.torso_angle
        x_ub[3:n_q] = limits.rom
        x_ub[n_q : n_q + 3] = limits.torso_vel
        x_ub[n_q + 3 :] = limits.vel
        N = self.__grid.n_intervals
        x_ub_all = np.tile(x_ub, (N + 1, 1))
        x_ub_all[0] = 0.0
        ub = [x_ub_all.ravel(), np.full(self.n_controls, limits.torque)]
        lb = [-ub[0], -ub[1]]
        if self.__mode == "variable":
            n_l = model.n_links
            upper = model.total_length - (n_l - 1) * LENGTH_LOWER_BOUND
            lb.append(np.full(n_l, LENGTH_LOWER_BOUND))
            ub.append(np.full(n_l, upper))
        return np.concatenate(lb), np.concatenate(ub)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def eval_objective(self, z: np.ndarray) -> float:
        return self.__evaluate(z)["objective"]

    def eval_gradient(self, z: np.ndarray) -> np.ndarray:
        return self.__evaluate(z)["gradient"]

    def eval_constraints(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Returns:
            (c_eq, c_ineq): equality residuals (defects, then the length sum
            in variable mode) and inequality values (effort ball, rate
            bounds, collision, length lower bounds), feasible when <= 0.
        """
        values = self.__evaluate(z)
        return values["c_eq"], values["c_ineq"]

    def eval_jacobians(
        self, z: np.ndarray
    ) -> tuple[scipy.sparse.csr_array, scipy.sparse.csr_array]:
        """
        Returns:
            Sparse Jacobians of c_eq and c_ineq.
        """
        values = self.__evaluate(z)
        return values["J_eq"], values["J_ineq"]

    def constraint_violation(self, z: np.ndarray) -> float:
        """
        Max-norm of the violation of constraints and bounds.
        """
        c_eq, c_ineq = self.eval_constraints(z)
        lb, ub = self.bounds
        parts = [
            np.abs(c_eq),
            np.maximum(c_ineq, 0.0),
            np.maximum(lb - z, 0.0),
            np.maximum(z - ub, 0.0),
        ]
        return float(max(np.max(p, initial=0.0) for p in parts))

    def state_derivatives(self, z: np.ndarray) -> np.ndarray:
        """Dynamics f(x_k, u_k) at the knots, (N + 1, n_x)."""
        return self.__evaluate(z)["f_knots"]

    def __evaluate(self, z: np.ndarray) -> dict:
        z = np.asarray(z, dtype=float)
        key = z.tobytes()
        if key == self.__cache_key:
            return self.__cache
        X, U, L = self.unpack(z)
        check_finite(z, "decision vector", iterate=z)
        values = self.__compute(X, U, L)
        check_finite(np.array([values["objective"]]), "objective", iterate=z)
        check_finite(values["gradient"], "objective gradient", iterate=z)
        check_finite(values["c_eq"], "equality constraints", iterate=z)
        check_finite(values["c_ineq"], "inequality constraints", iterate=z)
        check_finite(values["J_eq"].data, "equality Jacobian", iterate=z)
        check_finite(values["J_ineq"].data, "inequality Jacobian", iterate=z)
        self.__cache_key = key
        self.__cache = values
        return values

    def __f(
        self, x: np.ndarray, u: np.ndarray, L: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
        """
        State derivatives and their Jacobians A = df/dx, B = df/du,
        F = df/dL at a stack of samples.
        """
        n_q = self.__model.n_q
        variable = self.__mode == "variable"
        ev = self.__dynamics.evaluate(
            x[:, :n_q],
            x[:, n_q:],
            u,
            lengths=L,
            derivatives=True,
            length_derivatives=variable,
        )
        K = len(x)
        f = np.concatenate([x[:, n_q:], ev.qddot], axis=1)
        A = np.zeros((K, self.n_x, self.n_x))
        A[:, :n_q, n_q:] = np.eye(n_q)
        A[:, n_q:, :n_q] = ev.d_q
        A[:, n_q:, n_q:] = ev.d_qdot
        B = np.zeros((K, self.n_x, self.n_u))
        B[:, n_q:, :] = ev.d_u
        F = None
        if variable:
            F = np.zeros((K, self.n_x, self.__model.n_links))
            F[:, n_q:, :] = ev.d_lengths
        return f, A, B, F

    def __compute(self, X: np.ndarray, U: np.ndarray, L: np.ndarray) -> dict:
        model = self.__model
        limits = model.limits
        grid = self.__grid
        N = grid.n_intervals
        dt = grid.dt
        n_x, n_u, n_q = self.n_x, self.n_u, model.n_q
        n_l = self.n_lengths
        u_knots = U[0::2]
        u_mids = U[1::2]
        eye = np.eye(n_x)

        f, A, B, F = self.__f(X, u_knots, L)
        x_mid = 0.5 * (X[:-1] + X[1:]) + dt / 8.0 * (f[:-1] - f[1:])
        f_m, A_m, B_m, F_m = self.__f(x_mid, u_mids, L)

        defects = X[1:] - X[:-1] - dt / 6.0 * (f[:-1] + 4.0 * f_m + f[1:])

        # Jacobian blocks of the defects, one per interval.
        dxm_dxk = 0.5 * eye + dt / 8.0 * A[:-1]
        dxm_dxk1 = 0.5 * eye - dt / 8.0 * A[1:]
        D_xk = -eye - dt / 6.0 * (A[:-1] + 4.0 * A_m @ dxm_dxk)
        D_xk1 = eye - dt / 6.0 * (A[1:] + 4.0 * A_m @ dxm_dxk1)
        D_uk = -dt / 6.0 * (B[:-1] + 4.0 * (dt / 8.0) * A_m @ B[:-1])
        D_um = -dt / 6.0 * 4.0 * B_m
        D_uk1 = -dt / 6.0 * (B[1:] - 4.0 * (dt / 8.0) * A_m @ B[1:])

        col_u = self.n_states
        col_l = self.n_states + self.n_controls
        k = np.arange(N)
        rows0 = k * n_x
        eq = _TripletBuilder()
        eq.add_blocks(D_xk, rows0, k * n_x)
        eq.add_blocks(D_xk1, rows0, (k + 1) * n_x)
        eq.add_blocks(D_uk, rows0, col_u + 2 * k * n_u)
        eq.add_blocks(D_um, rows0, col_u + (2 * k + 1) * n_u)
        eq.add_blocks(D_uk1, rows0, col_u + (2 * k + 2) * n_u)
        c_eq = [defects.ravel()]
        if F is not None:
            dxm_dL = dt / 8.0 * (F[:-1] - F[1:])
            D_L = -dt / 6.0 * (F[:-1] + 4.0 * (F_m + A_m @ dxm_dL) + F[1:])
            eq.add_blocks(D_L, rows0, np.full(N, col_l))
            row = N * n_x
            eq.add(np.full(n_l, row), col_l + np.arange(n_l), np.ones(n_l))
            c_eq.append(np.array([math.fsum(L) - model.total_length]))

        # Path constraints.
        ineq = _TripletBuilder()
        n_samples = 2 * N + 1
        effort = np.sum(U * U, axis=1) - limits.effort_bound
        s = np.arange(n_samples)
        ineq.add(
            np.repeat(s, n_u),
            col_u + (s[:, None] * n_u + np.arange(n_u)).ravel(),
            (2.0 * U).ravel(),
        )
        row = n_samples

        dU = U[1:] - U[:-1]
        slack = limits.rate_bound * 0.5 * dt
        rate = np.concatenate([(dU - slack).ravel(), (-dU - slack).ravel()])
        n_rate = (n_samples - 1) * n_u
        idx = np.arange(n_rate)
        for sign, offset in ((1.0, 0), (-1.0, n_rate)):
            ineq.add(
                row + offset + idx, col_u + idx + n_u, np.full(n_rate, sign)
            )
            ineq.add(row + offset + idx, col_u + idx, np.full(n_rate, -sign))
        row += 2 * n_rate

        q_knots = X[:, :n_q]
        lengths = L if self.__mode == "variable" else None
        collision = collision_values(model, self.__layout, q_knots, lengths)
        dg_dq, dg_dL = collision_jacobian(
            model, self.__layout, q_knots, lengths
        )
        n_pairs = self.__layout.n_pairs
        knots = np.arange(N + 1)
        if n_pairs > 0:
            ineq.add_blocks(dg_dq, row + knots * n_pairs, knots * n_x)
            if F is not None:
                ineq.add_blocks(
                    dg_dL, row + knots * n_pairs, np.full(N + 1, col_l)
                )
        row += (N + 1) * n_pairs
        c_ineq = [effort, rate, collision.ravel()]
        if F is not None:
            c_ineq.append(LENGTH_LOWER_BOUND - L)
            ineq.add(
                row + np.arange(n_l), col_l + np.arange(n_l), -np.ones(n_l)
            )

        # Objective: Simpson quadrature of the torso tracking error.
        err_k = X[:, :3] - self.__target_knots
        theta_mid = 0.5 * (X[:-1, :3] + X[1:, :3]) + dt / 8.0 * (
            X[:-1, n_q : n_q + 3] - X[1:, n_q : n_q + 3]
        )
        err_m = theta_mid - self.__target_mids
        w = simpson_knot_weights(N, dt)
        w_mid = 4.0 * dt / 6.0
        objective = float(
            np.sum(w * np.sum(err_k**2, axis=1))
            + w_mid * np.sum(err_m**2)
        )
        grad_X = np.zeros_like(X)
        grad_X[:, :3] = 2.0 * w[:, None] * err_k
        g_m = 2.0 * w_mid * err_m
        grad_X[:-1, :3] += 0.5 * g_m
        grad_X[1:, :3] += 0.5 * g_m
        grad_X[:-1, n_q : n_q + 3] += dt / 8.0 * g_m
        grad_X[1:, n_q : n_q + 3] -= dt / 8.0 * g_m
        gradient = np.zeros(self.n)
        gradient[: self.n_states] = grad_X.ravel()

        return {
            "objective": objective,
            "gradient": gradient,
            "c_eq": np.concatenate(c_eq),
            "c_ineq": np.concatenate(c_ineq),
            "J_eq": eq.build((self.n_eq, self.n)),
            "J_ineq": ineq.build((self.n_ineq, self.n)),
            "f_knots": f,
        }


class _TripletBuilder:
    """
    Accumulates COO triplets of a sparse matrix.
    """

    __rows: list[np.ndarray]
    __cols: list[np.ndarray]
    __data: list[np.ndarray]

    def __init__(self) -> None:
        self.__rows = []
        self.__cols = []
        self.__data = []

    def add(self, rows: np.ndarray, cols: np.ndarray, data: np.ndarray) -> None:
        self.__rows.append(np.asarray(rows).ravel())
        self.__cols.append(np.asarray(cols).ravel())
        self.__data.append(np.asarray(data, dtype=float).ravel())

    def add_blocks(
        self, blocks: np.ndarray, row_starts: np.ndarray, col_starts: np.ndarray
    ) -> None:
        """
        Adds dense blocks (K, r, c) whose top-left corners are at
        (row_starts[k], col_starts[k]).
        """
        _, r, c = blocks.shape
        rows = row_starts[:, None, None] + np.arange(r)[None, :, None]
        cols = col_starts[:, None, None] + np.arange(c)[None, None, :]
        rows, cols = np.broadcast_arrays(rows, cols)
        self.add(rows, cols, blocks)

    def build(self, shape: tuple[int, int]) -> scipy.sparse.csr_array:
        if not self.__rows:
            return scipy.sparse.csr_array(shape)
        return scipy.sparse.coo_array(
            (
                np.concatenate(self.__data),
                (np.concatenate(self.__rows), np.concatenate(self.__cols)),
            ),
            shape=shape,
        ).tocsr()


def simpson_knot_weights(n_intervals: int, dt: float) -> np.ndarray:
    """
    Weights of the knot values in the composite Simpson rule whose
    midpoint values have weight 4 dt / 6.
    """
    w = np.full(n_intervals + 1, 2.0 * dt / 6.0)
    w[0] = w[-1] = dt / 6.0
    return w


def tracking_error(
    grid: Grid, target: FourierTarget, states: np.ndarray
) -> float:
    """
    Simpson quadrature of |theta(t) - Theta(t)|^2 over the grid, with the
    midpoint orientations taken from the cubic Hermite state interpolant.
    This is the objective of the transcribed problem.

    Args:
        grid:       Collocation grid.
        target:     Target orientation.
        states:     (N + 1, 2 n_q) knot states.

    Returns:
        The tracking error, rad^2 s.
    """
    n_q = states.shape[1] // 2
    dt = grid.dt
    theta_k, _ = target.evaluate(grid.knot_times)
    theta_m, _ = target.evaluate(grid.mid_times)
    err_k = states[:, :3] - theta_k
    mid = 0.5 * (states[:-1, :3] + states[1:, :3]) + dt / 8.0 * (
        states[:-1, n_q : n_q + 3] - states[1:, n_q : n_q + 3]
    )
    err_m = mid - theta_m
    w = simpson_knot_weights(grid.n_intervals, dt)
    return float(
        np.sum(w * np.sum(err_k**2, axis=1))
        + 4.0 * dt / 6.0 * np.sum(err_m**2)
    )


def build_nlp(
    model: ModelSpec,
    target: FourierTarget,
    grid: Grid | None = None,
    mode: Mode = "uniform",
    layout: SphereLayout | None = None,
) -> NlpProblem:
    """
    Transcribes the trajectory-optimization problem of one trial.

    Args:
        model:  The model (template model in variable mode).
        target: Target torso orientation.
        grid:   Collocation grid (dt = 0.004 s by default).
        mode:   "uniform" or "variable".
        layout: Collision spheres (default layout of the model if None).

    Returns:
        The problem.
    """
    return NlpProblem(model, target, grid, mode, layout)


def eval_objective(nlp: NlpProblem, z: np.ndarray) -> float:
    return nlp.eval_objective(z)


def eval_constraints(
    nlp: NlpProblem, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    return nlp.eval_constraints(z)


def eval_jacobians(
    nlp: NlpProblem, z: np.ndarray
) -> tuple[scipy.sparse.csr_array, scipy.sparse.csr_array]:
    return nlp.eval_jacobians(z)


def make_solution(
    nlp: NlpProblem,
    z: np.ndarray,
    status: str,
    iterations: int = 0,
    kkt_residual: float = math.nan,
) -> Solution:
    """
    Wraps a decision vector into a Solution. Optimized lengths are rescaled
    to sum exactly to the tail length (the solver meets the length-sum
    equality within its feasibility tolerance only).
    """
    X, U, L = nlp.unpack(z)
    model = nlp.model
    lengths = tuple(float(v) for v in L * (model.total_length / math.fsum(L)))
    return Solution(
        mode=nlp.mode,
        grid=nlp.grid,
        states=X.copy(),
        controls=U.copy(),
        state_derivatives=nlp.state_derivatives(z).copy(),
        lengths=lengths,
        objective=nlp.eval_objective(z),
        status=status,
        iterations=iterations,
        constraint_violation=nlp.constraint_violation(z),
        kkt_residual=kkt_residual,
    )


def interpolate_solution(
    solution: Solution, t: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Evaluates the collocation interpolants: cubic Hermite for the state,
    quadratic through knot, midpoint and knot for the control.

    Args:
        solution:   The solution.
        t:          A time instant or an array of them, s.

    Returns:
        (x(t), u(t)): (n_x,) and (n_u,) arrays for a scalar t, otherwise
        with a leading time axis. Knot states, knot controls and midpoint
        controls are returned exactly at their sample times.

    Raises:
        HorizonError:   If some t is outside the grid.
    """
    grid = solution.grid
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < grid.t0 - _SNAP * grid.dt) or np.any(
        times > grid.tf + _SNAP * grid.dt
    ):
        raise HorizonError(
            f"t must be in [{grid.t0}, {grid.tf}], got "
            f"[{times.min()}, {times.max()}]"
        )
    N = grid.n_intervals
    s = (times - grid.t0) / grid.dt
    k = np.clip(np.floor(s).astype(int), 0, N - 1)
    tau = s - k
    # Snap to the samples so stored values come back exactly.
    near_knot = np.abs(s - np.round(s)) < _SNAP
    k = np.where(near_knot, np.minimum(np.round(s).astype(int), N - 1), k)
    tau = np.where(near_knot, np.round(s) - k, tau)
    tau = np.where(np.abs(tau - 0.5) < _SNAP, 0.5, tau)

    X = solution.states
    Fx = solution.state_derivatives
    dt = grid.dt
    t2, t3 = tau * tau, tau * tau * tau
    h00 = (2.0 * t3 - 3.0 * t2 + 1.0)[:, None]
    h10 = (t3 - 2.0 * t2 + tau)[:, None]
    h01 = (-2.0 * t3 + 3.0 * t2)[:, None]
    h11 = (t3 - t2)[:, None]
    x = h00 * X[k] + h10 * dt * Fx[k] + h01 * X[k + 1] + h11 * dt * Fx[k + 1]

    U = solution.controls
    l0 = ((2.0 * tau - 1.0) * (tau - 1.0))[:, None]
    lm = (4.0 * tau * (1.0 - tau))[:, None]
    l1 = (tau * (2.0 * tau - 1.0))[:, None]
    u = l0 * U[2 * k] + lm * U[2 * k + 1] + l1 * U[2 * k + 2]
    if np.ndim(t) == 0:
        return x[0], u[0]
    return x, u


def save_solution(solution: Solution, path: str | PathLike) -> None:
    """
    Writes a solution file: a header block of "# key: value" lines followed
    by one CSV row per knot (t, q, qdot, u, and the control at the following
    midpoint).
    """
    n_q = solution.n_q
    n_u = solution.controls.shape[1]
    grid = solution.grid
    header = {
        "mode": solution.mode,
        "n_links": solution.n_links,
        "status": solution.status,
        "objective": repr(solution.objective),
        "iterations": solution.iterations,
        "constraint_violation": repr(solution.constraint_violation),
        "kkt_residual": repr(solution.kkt_residual),
        "lengths": ";".join(repr(v) for v in solution.lengths),
        "t0": repr(grid.t0),
        "tf": repr(grid.tf),
        "n_intervals": grid.n_intervals,
    }
    mids = np.full((grid.n_intervals + 1, n_u), np.nan)
    mids[:-1] = solution.controls[1::2]
    frame = pd.DataFrame(
        np.hstack(
            [
                grid.knot_times[:, None],
                solution.states,
                solution.controls[0::2],
                mids,
            ]
        ),
        columns=solution_columns(n_q, n_u),
    )
    buffer = io.StringIO()
    for key, value in header.items():
        buffer.write(f"# {key}: {value}\n")
    frame.to_csv(buffer, index=False)
    Path(path).write_text(buffer.getvalue())


def solution_columns(n_q: int, n_u: int) -> list[str]:
    return (
        ["t"]
        + [f"q{i}" for i in range(n_q)]
        + [f"qd{i}" for i in range(n_q)]
        + [f"u{i}" for i in range(n_u)]
        + [f"um{i}" for i in range(n_u)]
    )


def read_solution_header(path: str | PathLike) -> dict[str, str]:
    """Header block of a solution file (mode, n_links, status, ...)."""
    return _parse_header(Path(path).read_text())


def _parse_header(text: str) -> dict[str, str]:
    header = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        header[key.strip()] = value.strip()
    return header


def load_solution(path: str | PathLike, model: ModelSpec) -> Solution:
    """
    Reads a solution file written by save_solution. The knot state
    derivatives are recomputed from the model dynamics.

    Args:
        path:   Solution file.
        model:  Model (or template model) the solution was computed with.
    """
    text = Path(path).read_text()
    header = _parse_header(text)
    frame = pd.read_csv(
        io.StringIO(text), comment="#", float_precision="round_trip"
    )
    n_q = model.n_q
    n_u = model.n_u
    if list(frame.columns) != solution_columns(n_q, n_u):
        raise TranscriptionError(f"{path}: columns do not match the model")
    grid = Grid(
        t0=float(header["t0"]),
        tf=float(header["tf"]),
        n_intervals=int(header["n_intervals"]),
    )
    data = frame.to_numpy(dtype=float)
    states = data[:, 1 : 1 + 2 * n_q]
    u_knots = data[:, 1 + 2 * n_q : 1 + 2 * n_q + n_u]
    u_mids = data[:-1, 1 + 2 * n_q + n_u :]
    controls = np.empty((2 * grid.n_intervals + 1, n_u))
    controls[0::2] = u_knots
    controls[1::2] = u_mids
    lengths = tuple(float(v) for v in header["lengths"].split(";"))
    ev = chain_dynamics(model).evaluate(
        states[:, :n_q], states[:, n_q:], u_knots, lengths=lengths
    )
    derivatives = np.concatenate([states[:, n_q:], ev.qddot], axis=1)
    return Solution(
        mode=header["mode"],
        grid=grid,
        states=states,
        controls=controls,
        state_derivatives=derivatives,
        lengths=lengths,
        objective=float(header["objective"]),
        status=header["status"],
        iterations=int(header["iterations"]),
        constraint_violation=float(header["constraint_violation"]),
        kkt_residual=float(header["kkt_residual"]),
    )
