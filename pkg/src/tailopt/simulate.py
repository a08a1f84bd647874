#  Copyright (c) Michele De Stefano - 2026.
"""
Forward simulation of optimized controls and trial metrics.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .dynamics import chain_dynamics
from .errors import IntegrationError
from .model import ModelSpec
from .trajgen import FourierTarget
from .transcription import Solution, interpolate_solution, tracking_error

logger = logging.getLogger(__name__)

RTOL: float = 1e-8
ATOL: float = 1e-10
# Torso-angle RMS deviation accepted by validate (1 degree).
VALIDATION_THRESHOLD: float = np.deg2rad(1.0)
# Fraction of a bound from which a sample counts as saturated.
SATURATION_LEVEL: float = 0.95


@dataclass(frozen=True)
class Rollout:
    """
    Sampled forward simulation.

    Attributes:
        t:      (K,) sample times, s.
        states: (K, 2 n_q) states.
        work:   (K,) work done by the tail torques since t0, J, when
                requested.
    """

    t: np.ndarray
    states: np.ndarray
    work: np.ndarray | None = None


@dataclass(frozen=True)
class TrialMetrics:
    """
    Performance of one optimized trial.

    Attributes:
        tracking_error:         Integrated squared orientation error, rad^2 s.
        max_tip_speed:          Max tail-tip speed over the samples, m/s.
        per_joint_effort:       Integral of u_pitch^2 + u_yaw^2 per joint,
                                N^2 m^2 s.
        effort_saturation:      Fraction of samples with u'u >= 0.95 E.
        validation_rms:         Torso-angle RMS deviation between simulation
                                and collocation, rad.
        position_saturation:    Fraction of (knot, tail DOF) pairs at or above
                                95% of the joint range.
        velocity_saturation:    Same for the joint velocity bound.
        torque_saturation:      Fraction of (sample, tail DOF) pairs at or
                                above 95% of the torque bound.
    """

    tracking_error: float
    max_tip_speed: float
    per_joint_effort: tuple[float, ...]
    effort_saturation: float
    validation_rms: float
    position_saturation: float = 0.0
    velocity_saturation: float = 0.0
    torque_saturation: float = 0.0


def rollout(
    model: ModelSpec,
    control: Callable[[float], np.ndarray],
    x0: np.ndarray,
    tf: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    t_eval: np.ndarray | None = None,
    lengths: Sequence[float] | None = None,
    work: bool = False,
    method: str = "RK45",
    t0: float = 0.0,
) -> Rollout:
    """
    Integrates the dynamics under a control law from t0 to tf with an
    adaptive embedded Runge-Kutta method.

    Args:
        model:      The model.
        control:    Tail torques as a function of time, N m.
        x0:         Initial state (q, qdot).
        tf:         Final time, s.
        rtol, atol: Integration tolerances.
        t_eval:     Sample times of the returned trajectory (dense output).
                    Defaults to the integrator steps.
        lengths:    Vertebral lengths, defaults to the model ones.
        work:       Also integrate the power of the tail torques.
        method:     Any embedded method accepted by solve_ivp.
        t0:         Initial time, s.

    Raises:
        IntegrationError:   If the integrator fails (with time and state).
    """
    dyn = chain_dynamics(model)
    n_q = model.n_q
    x0 = np.asarray(x0, dtype=float)
    y0 = np.concatenate([x0, [0.0]]) if work else x0

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        q, qd = y[:n_q], y[n_q : 2 * n_q]
        u = np.asarray(control(t), dtype=float)
        qdd = dyn.forward_dynamics(q, qd, u, lengths)
        parts = [qd, qdd]
        if work:
            parts.append([u @ qd[3:]])
        return np.concatenate(parts)

    result = scipy.integrate.solve_ivp(
        rhs,
        (t0, tf),
        y0,
        method=method,
        rtol=rtol,
        atol=atol,
        t_eval=t_eval,
    )
    if not result.success:
        raise IntegrationError(
            result.message, time=float(result.t[-1]), state=result.y[:, -1]
        )
    y = result.y.T
    return Rollout(
        t=result.t,
        states=y[:, : 2 * n_q],
        work=y[:, -1] if work else None,
    )


def solution_control(solution: Solution) -> Callable[[float], np.ndarray]:
    """
    Control law of a solution: the quadratic control interpolant used by the
    collocation.
    """

    def control(t: float) -> np.ndarray:
        return interpolate_solution(solution, t)[1]

    return control


def validate(
    solution: Solution,
    model: ModelSpec,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> float:
    """
    Re-simulates the optimized controls from the initial collocation state
    and compares the torso angles with the collocation knot states.

    Args:
        solution:   The solution.
        model:      The model (template model for variable lengths).

    Returns:
        RMS torso-angle deviation over the knots, rad. Solutions pass when it
        is at most VALIDATION_THRESHOLD.
    """
    grid = solution.grid
    sim = rollout(
        model,
        solution_control(solution),
        solution.states[0],
        grid.tf,
        rtol=rtol,
        atol=atol,
        t_eval=grid.knot_times,
        lengths=solution.lengths,
        t0=grid.t0,
    )
    deviation = sim.states - solution.states
    torso_rms = float(np.sqrt(np.mean(deviation[:, :3] ** 2)))
    full_rms = float(np.sqrt(np.mean(deviation**2)))
    logger.info(
        f"Validation: torso RMS {np.rad2deg(torso_rms):.4f} deg, full-state "
        f"RMS {full_rms:.3e}"
    )
    return torso_rms


def passes_validation(validation_rms: float) -> bool:
    return validation_rms <= VALIDATION_THRESHOLD


def compute_metrics(
    solution: Solution,
    target: FourierTarget,
    model: ModelSpec,
    validation_rms: float | None = None,
) -> TrialMetrics:
    """
    Computes the metrics of an optimized trial.

    Args:
        solution:       The solution.
        target:         The target it tracks.
        model:          The model (template model for variable lengths).
        validation_rms: Result of validate, computed here when None.
    """
    grid = solution.grid
    limits = model.limits
    n_q = solution.n_q
    dt = grid.dt
    U = solution.controls

    if validation_rms is None:
        validation_rms = validate(solution, model)

    states, _ = interpolate_solution(solution, grid.sample_times)
    _, tip_velocity = chain_dynamics(model).tip_state(
        states[:, :n_q], states[:, n_q:], solution.lengths
    )
    max_tip_speed = float(np.max(np.linalg.norm(tip_velocity, axis=1)))

    squared = U[:, 0::2] ** 2 + U[:, 1::2] ** 2
    per_joint_effort = dt / 6.0 * (
        squared[0:-1:2] + 4.0 * squared[1::2] + squared[2::2]
    ).sum(axis=0)

    effort = np.sum(U * U, axis=1)
    tail_q = solution.states[:, 3:n_q]
    tail_qd = solution.states[:, n_q + 3 :]
    return TrialMetrics(
        tracking_error=tracking_error(grid, target, solution.states),
        max_tip_speed=max_tip_speed,
        per_joint_effort=tuple(float(e) for e in per_joint_effort),
        effort_saturation=float(
            np.mean(effort >= SATURATION_LEVEL * limits.effort_bound)
        ),
        validation_rms=float(validation_rms),
        position_saturation=float(
            np.mean(np.abs(tail_q) >= SATURATION_LEVEL * limits.rom)
        ),
        velocity_saturation=float(
            np.mean(np.abs(tail_qd) >= SATURATION_LEVEL * limits.vel)
        ),
        torque_saturation=float(
            np.mean(np.abs(U) >= SATURATION_LEVEL * limits.torque)
        ),
    )
