#  Copyright (c) Michele De Stefano - 2026.
import math

import numpy as np
import pytest

from tailopt.dynamics import chain_dynamics
from tailopt.model import ModelSpec
from tailopt.simulate import (
    VALIDATION_THRESHOLD,
    compute_metrics,
    passes_validation,
    rollout,
    solution_control,
    validate,
)
from tailopt.trajgen import FourierTarget
from tailopt.transcription import Grid, Solution


def _constant_control_solution(
    model: ModelSpec,
    grid: Grid,
    u: np.ndarray,
    states: np.ndarray | None = None,
) -> Solution:
    N = grid.n_intervals
    if states is None:
        states = np.zeros((N + 1, 2 * model.n_q))
    return Solution(
        mode="uniform",
        grid=grid,
        states=states,
        controls=np.tile(u, (2 * N + 1, 1)),
        state_derivatives=np.zeros_like(states),
        lengths=model.link_lengths,
        objective=0.0,
        status="optimal",
    )


def _simulated_solution(
    model: ModelSpec, grid: Grid, u: np.ndarray
) -> Solution:
    """A solution whose knots lie on the true trajectory of constant u."""
    sim = rollout(
        model,
        lambda t: u,
        np.zeros(2 * model.n_q),
        grid.tf,
        t_eval=grid.knot_times,
    )
    n_q = model.n_q
    qddot = chain_dynamics(model).evaluate(
        sim.states[:, :n_q],
        sim.states[:, n_q:],
        np.tile(u, (len(sim.t), 1)),
    ).qddot
    solution = _constant_control_solution(model, grid, u, sim.states)
    solution.state_derivatives = np.hstack([sim.states[:, n_q:], qddot])
    return solution


def test_rest_without_torque_stays_at_rest(three_link_model: ModelSpec) -> None:
    # when
    sim = rollout(
        three_link_model,
        lambda t: np.zeros(6),
        np.zeros(18),
        0.5,
        t_eval=np.linspace(0.0, 0.5, 11),
    )

    # then
    assert sim.states.shape == (11, 18)
    np.testing.assert_array_equal(sim.states, 0.0)
    assert sim.work is None


def test_tail_torque_counter_rotates_the_torso(
    one_link_model: ModelSpec,
) -> None:
    # when (positive pitch torque on the tail)
    sim = rollout(
        one_link_model, lambda t: np.array([1.0, 0.0]), np.zeros(10), 0.2
    )

    # then
    final = sim.states[-1]
    assert final[3] > 0.0
    assert final[1] < 0.0


def test_work_equals_kinetic_energy(three_link_model: ModelSpec) -> None:
    # given
    def control(t: float) -> np.ndarray:
        return np.array([2.0, -1.0, 0.5, 1.5, -2.0, 0.3]) * math.cos(5.0 * t)

    # when
    sim = rollout(three_link_model, control, np.zeros(18), 0.3, work=True)

    # then
    final = sim.states[-1]
    energy = chain_dynamics(three_link_model).kinetic_energy(
        final[:9], final[9:]
    )
    assert sim.work[-1] == pytest.approx(energy, rel=1e-6)
    assert energy > 0.0


def test_per_joint_effort(one_link_model: ModelSpec, coarse_grid: Grid) -> None:
    # given (1 and 2 N m for 0.5 s)
    solution = _constant_control_solution(
        one_link_model, coarse_grid, np.array([1.0, 2.0])
    )
    target = FourierTarget(
        a=np.zeros((3, 6)), b=np.zeros((3, 5)), omega=np.full(3, math.pi)
    )

    # when
    metrics = compute_metrics(
        solution, target, one_link_model, validation_rms=0.0
    )

    # then
    assert metrics.per_joint_effort == pytest.approx((2.5,))
    assert metrics.effort_saturation == 0.0
    assert metrics.torque_saturation == 0.0
    assert metrics.max_tip_speed == 0.0
    assert metrics.tracking_error == 0.0


def test_saturation_fractions(
    three_link_model: ModelSpec, zero_target: FourierTarget, coarse_grid: Grid
) -> None:
    # given (5 N m on the first joint: effort and torque at their bounds)
    u = np.array([5.0, 5.0, 0.0, 0.0, 0.0, 0.0])
    states = np.zeros((coarse_grid.n_intervals + 1, 18))
    states[:, 3] = three_link_model.limits.rom

    # when
    metrics = compute_metrics(
        _constant_control_solution(three_link_model, coarse_grid, u, states),
        zero_target,
        three_link_model,
        validation_rms=0.0,
    )

    # then
    assert metrics.effort_saturation == 1.0
    assert metrics.torque_saturation == pytest.approx(2.0 / 6.0)
    assert metrics.position_saturation == pytest.approx(1.0 / 6.0)
    assert metrics.velocity_saturation == 0.0
    assert metrics.per_joint_effort == pytest.approx((25.0, 0.0, 0.0))


def test_tracking_error_metric(
    one_link_model: ModelSpec, zero_target: FourierTarget, coarse_grid: Grid
) -> None:
    # given
    states = np.zeros((coarse_grid.n_intervals + 1, 10))
    states[:, 2] = math.radians(math.sqrt(200.0))

    # when
    metrics = compute_metrics(
        _constant_control_solution(
            one_link_model, coarse_grid, np.zeros(2), states
        ),
        zero_target,
        one_link_model,
        validation_rms=0.0,
    )

    # then
    assert metrics.tracking_error == pytest.approx(
        100.0 * (math.pi / 180.0) ** 2
    )


def test_control_law_follows_the_interpolant(
    one_link_model: ModelSpec, coarse_grid: Grid
) -> None:
    # given
    solution = _constant_control_solution(
        one_link_model, coarse_grid, np.array([0.5, -0.25])
    )

    # when
    control = solution_control(solution)

    # then
    np.testing.assert_allclose(control(0.123), [0.5, -0.25])


def test_consistent_solution_validates(
    one_link_model: ModelSpec, coarse_grid: Grid
) -> None:
    # given
    solution = _simulated_solution(
        one_link_model, coarse_grid, np.array([0.5, -0.3])
    )

    # when
    rms = validate(solution, one_link_model)

    # then
    assert rms < 1e-6
    assert passes_validation(rms)


def test_perturbed_solution_fails_validation(
    one_link_model: ModelSpec, coarse_grid: Grid
) -> None:
    # given
    solution = _simulated_solution(
        one_link_model, coarse_grid, np.array([0.5, -0.3])
    )
    solution.states[1:, :3] += 0.05

    # when
    rms = validate(solution, one_link_model)

    # then
    assert rms > VALIDATION_THRESHOLD
    assert not passes_validation(rms)
