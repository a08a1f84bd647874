#  Copyright (c) Michele De Stefano - 2026.
import numpy as np
import pytest

from tailopt.dynamics import chain_dynamics
from tailopt.model import ModelSpec, build_uniform_model, build_variable_model
from tailopt.simulate import rollout


def _torques(t: float) -> np.ndarray:
    phases = np.arange(6)
    return 3.0 * np.sin(7.0 * t + phases) * np.cos(3.0 * t - 0.5 * phases)


@pytest.mark.parametrize("lengths", [(0.5, 0.5, 0.5), (0.2, 0.7, 0.6)])
def test_momentum_about_pivot_stays_zero(lengths: tuple[float, ...]) -> None:
    # given
    model = build_variable_model(lengths)
    t = np.linspace(0.0, 0.5, 51)

    # when
    sim = rollout(
        model, _torques, np.zeros(18), 0.5, t_eval=t, rtol=1e-10, atol=1e-12
    )

    # then
    momentum = chain_dynamics(model).angular_momentum_about_pivot(
        sim.states[:, :9], sim.states[:, 9:]
    )
    assert np.max(np.linalg.norm(momentum, axis=1)) <= 1e-6
    assert np.max(np.abs(sim.states[:, :3])) > 1e-3


def test_kinetic_energy_matches_tail_work(
    three_link_model: ModelSpec,
) -> None:
    # when
    sim = rollout(
        three_link_model,
        _torques,
        np.zeros(18),
        0.5,
        t_eval=np.linspace(0.0, 0.5, 26),
        work=True,
        rtol=1e-10,
        atol=1e-12,
    )

    # then
    energy = chain_dynamics(three_link_model).kinetic_energy(
        sim.states[:, :9], sim.states[:, 9:]
    )
    np.testing.assert_allclose(energy, sim.work, atol=1e-7)


def test_integrators_agree(three_link_model: ModelSpec) -> None:
    # given
    t = np.linspace(0.0, 0.5, 11)

    # when
    rk45 = rollout(three_link_model, _torques, np.zeros(18), 0.5, t_eval=t)
    dop853 = rollout(
        three_link_model,
        _torques,
        np.zeros(18),
        0.5,
        t_eval=t,
        method="DOP853",
    )

    # then
    np.testing.assert_allclose(rk45.states, dop853.states, atol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("n_links", [1, 2, 3, 4, 5, 6])
def test_random_torque_rollouts_conserve(n_links: int) -> None:
    # given
    model = build_uniform_model(n_links)
    engine = chain_dynamics(model)
    t = np.linspace(0.0, 0.5, 26)
    n_u = model.n_u

    for i in range(100):
        rng = np.random.default_rng([n_links, i])
        amplitude = rng.uniform(-1.0, 1.0, n_u) * model.limits.torque
        frequency = rng.uniform(1.0, 20.0, n_u)
        phase = rng.uniform(0.0, 2.0 * np.pi, n_u)

        # when
        sim = rollout(
            model,
            lambda s, a=amplitude, w=frequency, p=phase: a * np.sin(w * s + p),
            np.zeros(2 * model.n_q),
            0.5,
            t_eval=t,
            work=True,
            rtol=1e-10,
            atol=1e-12,
        )

        # then
        q, qdot = sim.states[:, : model.n_q], sim.states[:, model.n_q :]
        momentum = engine.angular_momentum_about_pivot(q, qdot)
        assert np.max(np.linalg.norm(momentum, axis=1)) <= 1e-6
        energy = engine.kinetic_energy(q, qdot)
        residual = np.max(np.abs(energy - sim.work))
        assert residual <= 1e-6 * max(float(np.max(energy)), 1.0)
