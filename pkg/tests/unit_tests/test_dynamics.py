#  Copyright (c) Michele De Stefano - 2026.
from collections.abc import Callable

import numpy as np
import pytest

from tailopt import dynamics, spatial
from tailopt.dynamics import CACHE_SIZE, ChainDynamics, chain_dynamics
from tailopt.errors import DimensionError, SingularConfigurationError
from tailopt.model import ModelSpec, build_uniform_model, build_variable_model


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_rotation_is_the_exponential_of_the_axis(axis: int) -> None:
    # given
    angle = 0.3
    e = np.zeros(3)
    e[axis] = 1.0
    v = np.array([0.2, -0.7, 1.1])

    # when
    R = spatial.rotation(axis, angle)

    # then (Rodrigues)
    expected = (
        v * np.cos(angle)
        + np.cross(e, v) * np.sin(angle)
        + e * (e @ v) * (1.0 - np.cos(angle))
    )
    np.testing.assert_allclose(R @ v, expected, atol=1e-15)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)


def test_spatial_cross_products_are_dual() -> None:
    # given
    rng = np.random.default_rng(0)
    v, m, f = rng.normal(size=(3, 6))

    # then
    assert spatial.cross_motion(v, m) @ f == pytest.approx(
        -(m @ spatial.cross_force(v, f))
    )


@pytest.mark.parametrize("n_links", [1, 2, 3, 4, 5, 6])
def test_mass_matrix_is_symmetric_positive_definite(
    n_links: int, rng: np.random.Generator, random_state: Callable
) -> None:
    # given
    model = build_uniform_model(n_links)
    q, _, _ = random_state(model, rng, 1000)

    # when
    M = dynamics.mass_matrix(model, q)

    # then
    assert M.shape == (1000, model.n_q, model.n_q)
    assert np.max(np.abs(M - np.swapaxes(M, 1, 2))) < 1e-12
    assert np.all(np.linalg.eigvalsh(M) > 0.0)


def test_mass_matrix_is_the_kinetic_energy_hessian(
    one_link_model: ModelSpec,
) -> None:
    # given
    engine = chain_dynamics(one_link_model)
    q = np.zeros(one_link_model.n_q)
    n = one_link_model.n_q
    eye = np.eye(n)

    def energy(qdot: np.ndarray) -> float:
        return engine.kinetic_energy(q, qdot)

    # when (exact for a quadratic form)
    hessian = np.array(
        [
            [
                (
                    energy(eye[i] + eye[j])
                    - energy(eye[i] - eye[j])
                    - energy(eye[j] - eye[i])
                    + energy(-eye[i] - eye[j])
                )
                / 4.0
                for j in range(n)
            ]
            for i in range(n)
        ]
    )

    # then
    M = engine.mass_matrix(q)
    assert M.shape == (5, 5)
    np.testing.assert_allclose(M, hessian, atol=1e-6)


def test_bias_forces_vanish_at_rest(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, _, _ = random_state(three_link_model, rng, 10)

    # when
    h = dynamics.bias_forces(three_link_model, q, np.zeros_like(q))

    # then
    np.testing.assert_array_equal(h, 0.0)


def test_bias_forces_are_inverse_dynamics_without_acceleration(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, qdot, _ = random_state(three_link_model, rng, 10)

    # when
    h = dynamics.bias_forces(three_link_model, q, qdot)
    tau = dynamics.inverse_dynamics(three_link_model, q, qdot, np.zeros_like(q))

    # then
    np.testing.assert_allclose(h, tau, atol=1e-12)


def test_bias_forces_conserve_energy(
    one_link_model: ModelSpec, rng: np.random.Generator, random_state: Callable
) -> None:
    # given
    engine = chain_dynamics(one_link_model)
    q, qdot, _ = random_state(one_link_model, rng, 1)
    q, qdot = q[0], qdot[0]
    qddot = engine.forward_dynamics(q, qdot, np.zeros(one_link_model.n_u))
    h = 1e-6

    # when (d/dt of the kinetic energy along the force-free motion)
    rate = (
        engine.kinetic_energy(q + h * qdot, qdot + h * qddot)
        - engine.kinetic_energy(q - h * qdot, qdot - h * qddot)
    ) / (2.0 * h)

    # then
    assert abs(rate) < 1e-8


def test_inverse_dynamics_columns_are_mass_matrix(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, _, _ = random_state(three_link_model, rng, 1)
    q = q[0]
    n = three_link_model.n_q

    # when
    columns = np.stack(
        [
            dynamics.inverse_dynamics(three_link_model, q, np.zeros(n), e)
            for e in np.eye(n)
        ],
        axis=1,
    )

    # then
    np.testing.assert_allclose(
        columns, dynamics.mass_matrix(three_link_model, q), atol=1e-12
    )


def test_inverse_dynamics_assembles_terms(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    engine = chain_dynamics(three_link_model)
    q, qdot, _ = random_state(three_link_model, rng, 20)
    qddot = rng.normal(size=q.shape)

    # when
    tau = engine.inverse_dynamics(q, qdot, qddot)
    terms = engine.dyn_terms(q, qdot)

    # then
    expected = np.einsum("kij,kj->ki", terms.M, qddot) + terms.h
    assert np.max(np.abs(tau - expected)) < 1e-10


def test_forward_dynamics_at_equilibrium(six_link_model: ModelSpec) -> None:
    # given
    n_q = six_link_model.n_q

    # when
    qddot = dynamics.forward_dynamics(
        six_link_model, np.zeros(n_q), np.zeros(n_q), np.zeros(n_q - 3)
    )

    # then
    np.testing.assert_array_equal(qddot, np.zeros(n_q))


def test_forward_dynamics_from_rest(three_link_model: ModelSpec) -> None:
    # given
    n_q = three_link_model.n_q
    u = np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0])

    # when
    qddot = dynamics.forward_dynamics(
        three_link_model, np.zeros(n_q), np.zeros(n_q), u
    )

    # then
    M = dynamics.mass_matrix(three_link_model, np.zeros(n_q))
    expected = np.linalg.solve(M, np.concatenate([np.zeros(3), u]))
    np.testing.assert_allclose(qddot, expected, atol=1e-12)


@pytest.mark.parametrize("n_links", [1, 2, 3, 4, 5, 6])
def test_forward_dynamics_algorithms_agree(
    n_links: int, rng: np.random.Generator, random_state: Callable
) -> None:
    # given
    engine = ChainDynamics(build_uniform_model(n_links))
    q, qdot, u = random_state(engine.model, rng, 1000)

    # when
    via_mass_matrix = engine.forward_dynamics(q, qdot, u)
    via_propagation = engine.forward_dynamics_aba(q, qdot, u)

    # then
    np.testing.assert_allclose(
        via_mass_matrix,
        via_propagation,
        rtol=1e-10,
        atol=1e-10 * np.max(np.abs(via_mass_matrix)),
    )


def test_forward_dynamics_rejects_singular_pitch(
    one_link_model: ModelSpec,
) -> None:
    # given
    q = np.zeros(one_link_model.n_q)
    q[1] = np.pi / 2.0

    # then
    with pytest.raises(SingularConfigurationError):
        dynamics.forward_dynamics(
            one_link_model, q, np.zeros_like(q), np.zeros(2)
        )


def test_forward_dynamics_rejects_wrong_shapes(
    one_link_model: ModelSpec,
) -> None:
    with pytest.raises(DimensionError):
        dynamics.forward_dynamics(
            one_link_model, np.zeros(4), np.zeros(4), np.zeros(2)
        )


def test_tip_state_at_rest(one_link_model: ModelSpec) -> None:
    # given
    q = np.zeros(one_link_model.n_q)

    # when
    position, velocity = dynamics.tip_state(one_link_model, q, np.zeros_like(q))

    # then
    np.testing.assert_allclose(position, [0.0, -2.0, 0.0], atol=1e-15)
    np.testing.assert_array_equal(velocity, 0.0)


@pytest.mark.parametrize("n_links", [1, 4])
def test_tip_speed_under_torso_yaw(n_links: int) -> None:
    # given
    model = build_uniform_model(n_links)
    q = np.zeros(model.n_q)
    qdot = np.zeros(model.n_q)
    qdot[2] = 1.0

    # when
    _, velocity = dynamics.tip_state(model, q, qdot)

    # then
    assert np.linalg.norm(velocity) == pytest.approx(2.0, rel=1e-12)


def test_tip_velocity_is_position_derivative(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, qdot, _ = random_state(three_link_model, rng, 1)
    q, qdot = q[0], qdot[0]
    h = 1e-6

    # when
    _, velocity = dynamics.tip_state(three_link_model, q, qdot)
    plus, _ = dynamics.tip_state(three_link_model, q + h * qdot, qdot)
    minus, _ = dynamics.tip_state(three_link_model, q - h * qdot, qdot)

    # then
    np.testing.assert_allclose(velocity, (plus - minus) / (2 * h), atol=1e-6)


def test_angular_momentum_at_rest(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, _, _ = random_state(three_link_model, rng, 5)

    # when
    momentum = dynamics.angular_momentum_about_pivot(
        three_link_model, q, np.zeros_like(q)
    )

    # then
    np.testing.assert_array_equal(momentum, 0.0)


def test_angular_momentum_of_torso_spin(one_link_model: ModelSpec) -> None:
    # given
    q = np.zeros(one_link_model.n_q)
    qdot = np.zeros(one_link_model.n_q)
    qdot[2] = 1.0

    # when
    momentum = dynamics.angular_momentum_about_pivot(one_link_model, q, qdot)

    # then
    torso_zz = 5.0 / 12.0 * (0.3**2 + 1.0**2)
    tail_zz = 1.5 / 12.0 * (1.5**2 + 0.1**2) + 1.5 * 1.25**2
    np.testing.assert_allclose(
        momentum, [0.0, 0.0, torso_zz + tail_zz], atol=1e-12
    )


def test_angular_momentum_is_mass_matrix_torso_rows(
    three_link_model: ModelSpec,
) -> None:
    # given (at q = 0 the world axes are the torso joint axes)
    q = np.zeros(three_link_model.n_q)
    qdot = np.random.default_rng(3).normal(size=three_link_model.n_q)

    # when
    momentum = dynamics.angular_momentum_about_pivot(three_link_model, q, qdot)

    # then (rows roll -> Y, pitch -> X, yaw -> Z)
    generalized = dynamics.mass_matrix(three_link_model, q) @ qdot
    np.testing.assert_allclose(
        momentum[[1, 0, 2]], generalized[:3], atol=1e-12
    )


@pytest.mark.parametrize("n_links", [1, 3, 6])
def test_partials_match_finite_differences(
    n_links: int,
    rng: np.random.Generator,
    random_state: Callable,
    fd: Callable,
) -> None:
    # given
    model = build_uniform_model(n_links)
    engine = chain_dynamics(model)
    q, qdot, u = (x[0] for x in random_state(model, rng, 1))

    # when
    d_q, d_qdot, d_u = dynamics.dynamics_partials(model, q, qdot, u)

    # then
    fd_q = fd(lambda x: engine.forward_dynamics(x, qdot, u), q)
    fd_qdot = fd(lambda x: engine.forward_dynamics(q, x, u), qdot)
    fd_u = fd(lambda x: engine.forward_dynamics(q, qdot, x), u)
    for analytic, numeric in ((d_q, fd_q), (d_qdot, fd_qdot), (d_u, fd_u)):
        np.testing.assert_allclose(
            analytic, numeric, rtol=1e-4, atol=1e-4 * np.max(np.abs(numeric))
        )


def test_input_partials_are_inverse_mass_matrix_columns(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, qdot, u = (x[0] for x in random_state(three_link_model, rng, 1))

    # when
    _, _, d_u = dynamics.dynamics_partials(three_link_model, q, qdot, u)

    # then
    M_inv = np.linalg.inv(dynamics.mass_matrix(three_link_model, q))
    np.testing.assert_allclose(d_u, M_inv[:, 3:], atol=1e-10)


def test_velocity_partials_vanish_at_rest(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    q, _, u = (x[0] for x in random_state(three_link_model, rng, 1))

    # when
    _, d_qdot, _ = dynamics.dynamics_partials(
        three_link_model, q, np.zeros_like(q), u
    )

    # then
    np.testing.assert_allclose(d_qdot, 0.0, atol=1e-12)


@pytest.mark.parametrize(
    "lengths", [(0.5, 0.5, 0.5), (0.2, 0.7, 0.6), (0.2, 0.2, 1.1)]
)
def test_length_partials_match_finite_differences(
    lengths: tuple[float, ...],
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
    fd: Callable,
) -> None:
    # given
    engine = chain_dynamics(three_link_model)
    q, qdot, u = (x[0] for x in random_state(three_link_model, rng, 1))
    L = np.array(lengths)

    # when
    d_lengths = dynamics.dynamics_partials_lengths(
        three_link_model, q, qdot, u, L
    )

    # then
    numeric = fd(lambda x: engine.forward_dynamics(q, qdot, u, x), L)
    assert d_lengths.shape == (three_link_model.n_q, 3)
    assert np.all(np.isfinite(d_lengths))
    np.testing.assert_allclose(
        d_lengths, numeric, rtol=1e-4, atol=1e-4 * np.max(np.abs(numeric))
    )


def test_lengths_override_matches_variable_model(
    three_link_model: ModelSpec,
    rng: np.random.Generator,
    random_state: Callable,
) -> None:
    # given
    lengths = [0.2, 0.7, 0.6]
    variable = build_variable_model(lengths)
    q, qdot, u = random_state(three_link_model, rng, 5)

    # when
    template = chain_dynamics(three_link_model).forward_dynamics(
        q, qdot, u, lengths
    )
    own = chain_dynamics(variable).forward_dynamics(q, qdot, u)

    # then
    np.testing.assert_allclose(template, own, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize(
    "lengths", [(0.1, 0.7, 0.7), (0.2, 0.15, 1.15), (0.2, 0.2, 1.2)]
)
def test_length_partials_reject_lengths_out_of_bounds(
    lengths: tuple[float, ...], three_link_model: ModelSpec
) -> None:
    # given
    q = np.zeros(three_link_model.n_q)

    # then
    with pytest.raises(DimensionError):
        dynamics.dynamics_partials_lengths(
            three_link_model, q, q, np.zeros(6), lengths
        )


def test_engines_are_shared_and_bounded() -> None:
    # when
    first = chain_dynamics(build_uniform_model(2))
    again = chain_dynamics(build_uniform_model(2))

    # then
    assert first is again
    assert chain_dynamics.cache_info().maxsize == CACHE_SIZE
