#  Copyright (c) Michele De Stefano - 2026.
"""
Rigid-body dynamics of the torso + tail chain, with a fixed pivot at the
torso center and no gravity.

The chain is serial and made of 1-DOF revolute joints: the torso joint is
split into yaw (Z), pitch (X) and roll (Y) joints with massless intermediate
bodies, and every tail joint into pitch (X) and yaw (Z). The generalized
coordinates keep the external ordering (torso roll, pitch, yaw, then the
pitch/yaw pair of every vertebra, proximal to distal). Internally the torso
coordinates are permuted into chain order.

All the numerical routines are batched: arrays with a leading sample axis are
processed in one pass.
"""

import functools
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import spatial
from .errors import DimensionError, SingularConfigurationError
from .model import LENGTH_LOWER_BOUND, ModelSpec

logger = logging.getLogger(__name__)

AXIS_X: int = 0
AXIS_Y: int = 1
AXIS_Z: int = 2

# Unit vector along -Y, the direction every vertebra extends along.
_LINK_DIRECTION = np.array([0.0, -1.0, 0.0])

# Pivots of the joint-space factorizations below this fraction of the
# largest diagonal entry flag a representation singularity.
_SINGULAR_RTOL: float = 1e-10
# Engines kept by chain_dynamics.
CACHE_SIZE: int = 64
# Slack on the length bounds for lengths that round across them.
_LENGTH_TOL: float = 1e-9


@dataclass(frozen=True)
class DynTerms:
    """
    Terms of the manipulator equation M(q) qdd + h(q, qdot) = tau.

    Attributes:
        M:  (..., n_q, n_q) mass-inertia matrix, kg m^2.
        h:  (..., n_q) Coriolis and centrifugal bias forces, N m.
    """

    M: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class DynamicsEvaluation:
    """
    Forward dynamics and its partial derivatives at a stack of states.

    Attributes:
        qddot:      (K, n_q) accelerations.
        d_q:        (K, n_q, n_q) d qddot / d q.
        d_qdot:     (K, n_q, n_q) d qddot / d qdot.
        d_u:        (K, n_q, n_u) d qddot / d u.
        d_lengths:  (K, n_q, n_l) d qddot / d L, when requested.
    """

    qddot: np.ndarray
    d_q: np.ndarray | None = None
    d_qdot: np.ndarray | None = None
    d_u: np.ndarray | None = None
    d_lengths: np.ndarray | None = None


@dataclass(frozen=True)
class _Kinematics:
    X: list[np.ndarray]  # parent -> child Plücker transforms, (K, 6, 6)
    E: list[np.ndarray]  # joint rotations parent -> child, (K, 3, 3)


class ChainDynamics:
    """
    Dynamics engine of one model. Body inertias are rebuilt from the
    vertebral lengths on every call, so the same engine serves models whose
    lengths are decision variables.
    """

    __model: ModelSpec
    __n: int
    __axes: list[int]
    __perm: np.ndarray
    __torso_inertia: np.ndarray

    def __init__(self, model: ModelSpec) -> None:
        """
        Constructor.

        Args:
            model:  The template model. Its lengths are the default lengths
                    of every evaluation.
        """
        self.__model = model
        self.__n = model.n_q
        self.__axes = [AXIS_Z, AXIS_X, AXIS_Y]
        self.__axes += [AXIS_X, AXIS_Z] * model.n_links
        # chain body b is driven by q[perm[b]]
        self.__perm = np.array([2, 1, 0] + list(range(3, self.__n)))
        self.__torso_inertia = model.torso_inertia().spatial()

    @property
    def model(self) -> ModelSpec:
        return self.__model

    @property
    def n_q(self) -> int:
        return self.__n

    # ------------------------------------------------------------------
    # Public API (external coordinate ordering)
    # ------------------------------------------------------------------

    def mass_matrix(
        self, q: np.ndarray, lengths: Sequence[float] | None = None
    ) -> np.ndarray:
        """
        Joint-space inertia matrix, computed with the composite rigid body
        algorithm.

        Args:
            q:          (n_q,) or (K, n_q) configuration, rad.
            lengths:    Optional vertebral lengths.

        Returns:
            (n_q, n_q) or (K, n_q, n_q) symmetric matrix.
        """
        qb, single = self.__batch(q)
        L = self.__lengths(lengths)
        M = self.__to_q_matrix(self.__crba(self.__to_chain(qb), L))
        return M[0] if single else M

    def bias_forces(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Coriolis and centrifugal generalized forces (no gravity).
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        L = self.__lengths(lengths)
        zeros = np.zeros_like(qb)
        tau, *_ = self.__rnea(
            self.__to_chain(qb), self.__to_chain(qdb), zeros, L
        )
        h = self.__to_q_vector(tau)
        return h[0] if single else h

    def dyn_terms(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> DynTerms:
        return DynTerms(
            M=self.mass_matrix(q, lengths),
            h=self.bias_forces(q, qdot, lengths),
        )

    def inverse_dynamics(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        qddot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Generalized forces tau = M qddot + h, via recursive Newton-Euler.
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        qddb, _ = self.__batch(qddot)
        L = self.__lengths(lengths)
        tau, *_ = self.__rnea(
            self.__to_chain(qb),
            self.__to_chain(qdb),
            self.__to_chain(qddb),
            L,
        )
        tau = self.__to_q_vector(tau)
        return tau[0] if single else tau

    def forward_dynamics(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        u: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Accelerations qddot = M^-1 (-h + [0, 0, 0, u]) with zero torque on
        the torso joint.

        Args:
            q:          (n_q,) or (K, n_q) configuration, rad.
            qdot:       Velocities, rad/s, same shape as q.
            u:          (n_u,) or (K, n_u) tail torques, N m.
            lengths:    Optional vertebral lengths.

        Raises:
            SingularConfigurationError: M is not positive definite.
        """
        qddot = self.evaluate(q, qdot, u, lengths).qddot
        return qddot[0] if np.ndim(q) == 1 else qddot

    def forward_dynamics_aba(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        u: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Same as forward_dynamics but through the articulated-body
        (propagation) algorithm, without forming M.
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        ub, _ = self.__batch(u, self.__n - 3)
        L = self.__lengths(lengths)
        tau = self.__chain_torques(ub)
        qdd = self.__aba(self.__to_chain(qb), self.__to_chain(qdb), tau, L)
        qdd = self.__to_q_vector(qdd)
        return qdd[0] if single else qdd

    def evaluate(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        u: np.ndarray,
        lengths: Sequence[float] | None = None,
        derivatives: bool = False,
        length_derivatives: bool = False,
    ) -> DynamicsEvaluation:
        """
        Forward dynamics with optional analytic partial derivatives.

        The partials come from differentiating the Newton-Euler recursion:
        since M qddot + h = tau_applied, d qddot = -M^-1 d ID, where d ID is
        the derivative of inverse dynamics at the current acceleration.

        Args:
            q, qdot:            (n_q,) or (K, n_q) state.
            u:                  (n_u,) or (K, n_u) tail torques.
            lengths:            Optional vertebral lengths.
            derivatives:        Compute d/dq, d/dqdot and d/du.
            length_derivatives: Also compute d/dL.

        Returns:
            The evaluation (batched arrays, see DynamicsEvaluation).
        """
        qb, _ = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        ub, _ = self.__batch(u, self.__n - 3)
        if not qb.shape[0] == qdb.shape[0] == ub.shape[0]:
            raise DimensionError("q, qdot and u have different sample counts")
        L = self.__lengths(lengths)
        qc = self.__to_chain(qb)
        qdc = self.__to_chain(qdb)
        tau = self.__chain_torques(ub)

        h, *_ = self.__rnea(qc, qdc, np.zeros_like(qc), L)
        M = self.__crba(qc, L)
        self.__check_positive_definite(M)
        qddc = np.linalg.solve(M, (tau - h)[..., None])[..., 0]

        result = DynamicsEvaluation(qddot=self.__to_q_vector(qddc))
        if derivatives or length_derivatives:
            _, d_tau = self.__rnea(
                qc, qdc, qddc, L, tangents=True, with_lengths=length_derivatives
            )
            n = self.__n
            n_u = n - 3
            rhs = np.concatenate(
                [
                    -d_tau,
                    np.broadcast_to(self.__input_map(), (len(qc), n, n_u)),
                ],
                axis=2,
            )
            sol = np.linalg.solve(M, rhs)
            result = DynamicsEvaluation(
                qddot=result.qddot,
                d_q=self.__to_q_matrix(sol[:, :, :n]),
                d_qdot=self.__to_q_matrix(sol[:, :, n : 2 * n]),
                d_u=self.__to_q_rows(sol[:, :, -n_u:]),
                d_lengths=(
                    self.__to_q_rows(sol[:, :, 2 * n : -n_u])
                    if length_derivatives
                    else None
                ),
            )
        return result

    def tip_state(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        World position and velocity of the distal end of the last vertebra.

        Returns:
            (position, velocity), each (3,) or (K, 3), in m and m/s.
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        L = self.__lengths(lengths)
        qc = self.__to_chain(qb)
        kin = self.__kinematics(qc, L)
        rotations, positions = self.__world_frames(qc, L)
        velocities = self.__velocities(kin, self.__to_chain(qdb))
        tip_local = L[-1] * _LINK_DIRECTION
        R = rotations[-1]
        p = positions[-1] + R @ tip_local
        v_body = velocities[-1]
        v_local = v_body[:, 3:] + np.cross(v_body[:, :3], tip_local)
        v = np.einsum("kij,kj->ki", R, v_local)
        if single:
            return p[0], v[0]
        return p, v

    def angular_momentum_about_pivot(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray:
        """
        Total angular momentum of all the bodies about the torso pivot, in
        world coordinates, kg m^2/s.
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        L = self.__lengths(lengths)
        qc = self.__to_chain(qb)
        kin = self.__kinematics(qc, L)
        velocities = self.__velocities(kin, self.__to_chain(qdb))
        inertias, _ = self.__inertias(L)
        K = len(qc)
        to_body = np.broadcast_to(np.eye(6), (K, 6, 6))
        total = np.zeros((K, 6))
        for b in range(self.__n):
            to_body = kin.X[b] @ to_body
            momentum = velocities[b] @ inertias[b].T
            total += spatial.apply_transpose(to_body, momentum)
        return total[0, :3] if single else total[:, :3]

    def kinetic_energy(
        self,
        q: np.ndarray,
        qdot: np.ndarray,
        lengths: Sequence[float] | None = None,
    ) -> np.ndarray | float:
        """
        Kinetic energy as the sum of the body energies 1/2 v' I v, J.
        """
        qb, single = self.__batch(q)
        qdb, _ = self.__batch(qdot)
        L = self.__lengths(lengths)
        qc = self.__to_chain(qb)
        kin = self.__kinematics(qc, L)
        velocities = self.__velocities(kin, self.__to_chain(qdb))
        inertias, _ = self.__inertias(L)
        energy = np.zeros(len(qc))
        for v, inertia in zip(velocities, inertias, strict=True):
            energy += 0.5 * np.einsum("ki,ij,kj->k", v, inertia, v)
        return float(energy[0]) if single else energy

    # ------------------------------------------------------------------
    # Recursive algorithms (chain ordering)
    # ------------------------------------------------------------------

    def __rnea(
        self,
        qc: np.ndarray,
        qdc: np.ndarray,
        qddc: np.ndarray,
        L: np.ndarray,
        tangents: bool = False,
        with_lengths: bool = False,
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """
        Recursive Newton-Euler inverse dynamics. With tangents=True it also
        propagates the derivatives of every quantity with respect to
        (q, qdot[, L]) and returns d tau with shape (K, n, P).
        """
        K, n = qc.shape
        kin = self.__kinematics(qc, L)
        inertias, d_inertias = self.__inertias(L, with_lengths)
        n_l = len(L) if with_lengths else 0
        P = 2 * n + n_l

        v_prev = np.zeros((K, 6))
        a_prev = np.zeros((K, 6))
        dv_prev = np.zeros((K, P, 6)) if tangents else None
        da_prev = np.zeros((K, P, 6)) if tangents else None
        forces = []
        d_forces = []
        for b in range(n):
            X = kin.X[b]
            axis = self.__axes[b]
            S = _unit_motion(axis)
            inertia = inertias[b]
            vJ = S * qdc[:, b, None]
            Xv = spatial.apply(X, v_prev)
            Xa = spatial.apply(X, a_prev)
            v = Xv + vJ
            a = Xa + S * qddc[:, b, None] + spatial.cross_motion(v, vJ)
            Iv = v @ inertia.T
            f = a @ inertia.T + spatial.cross_force(v, Iv)
            forces.append(f)

            if tangents:
                dv = spatial.apply(X, dv_prev)
                da = spatial.apply(X, da_prev)
                dv[:, b] -= spatial.cross_motion(S, Xv)
                da[:, b] -= spatial.cross_motion(S, Xa)
                dv[:, n + b] += S
                k = self.__offset_length_index(b)
                if k is not None and with_lengths:
                    dv[:, 2 * n + k, 3:] -= np.einsum(
                        "kij,kj->ki",
                        kin.E[b],
                        np.cross(_LINK_DIRECTION, v_prev[:, :3]),
                    )
                    da[:, 2 * n + k, 3:] -= np.einsum(
                        "kij,kj->ki",
                        kin.E[b],
                        np.cross(_LINK_DIRECTION, a_prev[:, :3]),
                    )
                da += spatial.cross_motion(dv, vJ[:, None, :])
                da[:, n + b] += spatial.cross_motion(v, S)
                Idv = dv @ inertia.T
                df = (
                    da @ inertia.T
                    + spatial.cross_force(dv, Iv[:, None, :])
                    + spatial.cross_force(v[:, None, :], Idv)
                )
                k = self.__link_index(b)
                if k is not None and with_lengths:
                    dI = d_inertias[k]
                    df[:, 2 * n + k] += a @ dI.T + spatial.cross_force(
                        v, v @ dI.T
                    )
                d_forces.append(df)
                dv_prev, da_prev = dv, da
            v_prev, a_prev = v, a

        tau = np.zeros((K, n))
        d_tau = np.zeros((K, n, P)) if tangents else None
        for b in reversed(range(n)):
            axis = self.__axes[b]
            tau[:, b] = forces[b][:, axis]
            if tangents:
                d_tau[:, b, :] = d_forces[b][:, :, axis]
            if b == 0:
                continue
            X = kin.X[b]
            forces[b - 1] = forces[b - 1] + spatial.apply_transpose(
                X, forces[b]
            )
            if tangents:
                S = _unit_motion(axis)
                d_parent = d_forces[b - 1] + spatial.apply_transpose(
                    X, d_forces[b]
                )
                d_parent[:, b] += spatial.apply_transpose(
                    X, spatial.cross_force(S, forces[b])
                )
                k = self.__offset_length_index(b)
                if k is not None and with_lengths:
                    # d(X^T)/dl f = [d x (E^T f_lin); 0]
                    f_lin = np.einsum(
                        "kji,kj->ki", kin.E[b], forces[b][:, 3:]
                    )
                    d_parent[:, 2 * n + k, :3] += np.cross(
                        _LINK_DIRECTION, f_lin
                    )
                d_forces[b - 1] = d_parent
        return tau, d_tau

    def __crba(self, qc: np.ndarray, L: np.ndarray) -> np.ndarray:
        K, n = qc.shape
        kin = self.__kinematics(qc, L)
        inertias, _ = self.__inertias(L)
        composite = [np.broadcast_to(I, (K, 6, 6)).copy() for I in inertias]
        for b in reversed(range(1, n)):
            composite[b - 1] += spatial.congruence(kin.X[b], composite[b])
        H = np.zeros((K, n, n))
        for b in range(n):
            F = composite[b][:, :, self.__axes[b]]
            H[:, b, b] = F[:, self.__axes[b]]
            j = b
            while j > 0:
                F = spatial.apply_transpose(kin.X[j], F)
                j -= 1
                H[:, b, j] = F[:, self.__axes[j]]
                H[:, j, b] = H[:, b, j]
        return H

    def __aba(
        self, qc: np.ndarray, qdc: np.ndarray, tau: np.ndarray, L: np.ndarray
    ) -> np.ndarray:
        K, n = qc.shape
        kin = self.__kinematics(qc, L)
        inertias, _ = self.__inertias(L)
        velocities = self.__velocities(kin, qdc)
        bias_acc = []
        art_inertia = []
        art_bias = []
        for b in range(n):
            vJ = _unit_motion(self.__axes[b]) * qdc[:, b, None]
            v = velocities[b]
            bias_acc.append(spatial.cross_motion(v, vJ))
            art_inertia.append(np.broadcast_to(inertias[b], (K, 6, 6)).copy())
            art_bias.append(spatial.cross_force(v, v @ inertias[b].T))

        U = [None] * n
        D = [None] * n
        u = [None] * n
        for b in reversed(range(n)):
            axis = self.__axes[b]
            U[b] = art_inertia[b][:, :, axis]
            D[b] = U[b][:, axis]
            scale = np.trace(art_inertia[b][:, :3, :3], axis1=1, axis2=2)
            if np.any(D[b] <= _SINGULAR_RTOL * scale):
                raise SingularConfigurationError(
                    f"articulated inertia vanishes along joint {b}"
                )
            u[b] = tau[:, b] - art_bias[b][:, axis]
            if b == 0:
                continue
            Ia = art_inertia[b] - U[b][:, :, None] * U[b][:, None, :] / D[b][
                :, None, None
            ]
            pa = (
                art_bias[b]
                + np.einsum("kij,kj->ki", Ia, bias_acc[b])
                + U[b] * (u[b] / D[b])[:, None]
            )
            art_inertia[b - 1] += spatial.congruence(kin.X[b], Ia)
            art_bias[b - 1] += spatial.apply_transpose(kin.X[b], pa)

        qdd = np.zeros((K, n))
        a_prev = np.zeros((K, 6))
        for b in range(n):
            a = spatial.apply(kin.X[b], a_prev) + bias_acc[b]
            qdd[:, b] = (u[b] - np.einsum("ki,ki->k", U[b], a)) / D[b]
            a[:, self.__axes[b]] += qdd[:, b]
            a_prev = a
        return qdd

    # ------------------------------------------------------------------
    # Kinematics and bodies
    # ------------------------------------------------------------------

    def __kinematics(self, qc: np.ndarray, L: np.ndarray) -> _Kinematics:
        offsets = self.__offsets(L)
        X = []
        E = []
        for b in range(self.__n):
            Eb = np.swapaxes(spatial.rotation(self.__axes[b], qc[:, b]), -1, -2)
            E.append(Eb)
            X.append(spatial.motion_transform(Eb, offsets[b]))
        return _Kinematics(X=X, E=E)

    def __world_frames(
        self, qc: np.ndarray, L: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """
        World rotation (child -> world) and origin of every body frame.
        """
        K = len(qc)
        offsets = self.__offsets(L)
        R_prev = np.broadcast_to(np.eye(3), (K, 3, 3))
        p_prev = np.zeros((K, 3))
        rotations = []
        positions = []
        for b in range(self.__n):
            p = p_prev + R_prev @ offsets[b]
            R = R_prev @ spatial.rotation(self.__axes[b], qc[:, b])
            rotations.append(R)
            positions.append(p)
            R_prev, p_prev = R, p
        return rotations, positions

    def __velocities(
        self, kin: _Kinematics, qdc: np.ndarray
    ) -> list[np.ndarray]:
        v_prev = np.zeros((len(qdc), 6))
        velocities = []
        for b in range(self.__n):
            v = spatial.apply(kin.X[b], v_prev)
            v[:, self.__axes[b]] += qdc[:, b]
            velocities.append(v)
            v_prev = v
        return velocities

    def __offsets(self, L: np.ndarray) -> list[np.ndarray]:
        offsets = [np.zeros(3) for _ in range(self.__n)]
        offsets[3] = np.asarray(self.__model.attach_offset, dtype=float)
        for k in range(1, self.__model.n_links):
            offsets[3 + 2 * k] = L[k - 1] * _LINK_DIRECTION
        return offsets

    def __inertias(
        self, L: np.ndarray, with_lengths: bool = False
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """
        Spatial inertias of the chain bodies and, optionally, the derivative
        of every vertebra inertia with respect to its own length.
        """
        model = self.__model
        inertias = [np.zeros((6, 6)) for _ in range(self.__n)]
        inertias[2] = self.__torso_inertia
        for k, link in enumerate(model.link_inertias(L)):
            inertias[4 + 2 * k] = link.spatial()
        d_inertias = []
        if with_lengths:
            d_inertias = [
                _link_inertia_length_derivative(
                    length, model.cross_section, model.linear_density
                )
                for length in L
            ]
        return inertias, d_inertias

    def __offset_length_index(self, b: int) -> int | None:
        """Index of the length that sets the tree offset of body b."""
        if b >= 5 and (b - 3) % 2 == 0:
            return (b - 3) // 2 - 1
        return None

    def __link_index(self, b: int) -> int | None:
        """Index of the vertebra carried by body b."""
        if b >= 4 and (b - 4) % 2 == 0:
            return (b - 4) // 2
        return None

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def __check_positive_definite(self, M: np.ndarray) -> None:
        try:
            chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as e:
            raise SingularConfigurationError(
                "mass matrix is not positive definite"
            ) from e
        pivots = np.diagonal(chol, axis1=1, axis2=2) ** 2
        scale = np.max(np.diagonal(M, axis1=1, axis2=2), axis=1)
        if np.any(np.min(pivots, axis=1) <= _SINGULAR_RTOL * scale):
            raise SingularConfigurationError(
                "mass matrix is numerically singular (torso pitch near 90 deg?)"
            )

    def __batch(self, x: np.ndarray, size: int | None = None):
        size = self.__n if size is None else size
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.ndim != 2 or xb.shape[1] != size:
            raise DimensionError(
                f"expected trailing dimension {size}, got shape {x.shape}"
            )
        return xb, single

    def __lengths(self, lengths: Sequence[float] | None) -> np.ndarray:
        if lengths is None:
            return np.asarray(self.__model.link_lengths, dtype=float)
        L = np.asarray(lengths, dtype=float)
        if L.shape != (self.__model.n_links,):
            raise DimensionError(
                f"expected {self.__model.n_links} lengths, got shape {L.shape}"
            )
        if np.any(L <= 0.0):
            raise DimensionError("vertebral lengths must be positive")
        return L

    def __chain_torques(self, u: np.ndarray) -> np.ndarray:
        tau = np.zeros((len(u), self.__n))
        tau[:, 3:] = u
        return tau

    def __input_map(self) -> np.ndarray:
        B = np.zeros((self.__n, self.__n - 3))
        B[3:, :] = np.eye(self.__n - 3)
        return B

    def __to_chain(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.__perm]

    def __to_q_vector(self, xc: np.ndarray) -> np.ndarray:
        out = np.empty_like(xc)
        out[..., self.__perm] = xc
        return out

    def __to_q_rows(self, Ac: np.ndarray) -> np.ndarray:
        out = np.empty_like(Ac)
        out[..., self.__perm, :] = Ac
        return out

    def __to_q_matrix(self, Ac: np.ndarray) -> np.ndarray:
        out = np.empty_like(Ac)
        out[..., self.__perm[:, None], self.__perm[None, :]] = Ac
        return out


def _unit_motion(axis: int) -> np.ndarray:
    S = np.zeros(6)
    S[axis] = 1.0
    return S


def _link_inertia_length_derivative(
    length: float, cross_section: Sequence[float], density: float
) -> np.ndarray:
    """
    d/dl of the 6x6 spatial inertia of a vertebra of length l whose mass is
    density * l (center of mass at l/2 along -Y).
    """
    width, height = cross_section
    m = density * length
    dm = density
    com = 0.5 * length * _LINK_DIRECTION
    d_com = 0.5 * _LINK_DIRECTION
    base = np.array(
        [
            length**2 + height**2,
            width**2 + height**2,
            length**2 + width**2,
        ]
    )
    d_base = np.array([2.0 * length, 0.0, 2.0 * length])
    d_inertia_com = np.diag(dm / 12.0 * base + m / 12.0 * d_base)
    cx = spatial.skew(com)
    dcx = spatial.skew(d_com)
    out = np.zeros((6, 6))
    out[:3, :3] = d_inertia_com + dm * cx @ cx.T + m * (dcx @ cx.T + cx @ dcx.T)
    out[:3, 3:] = dm * cx + m * dcx
    out[3:, :3] = out[:3, 3:].T
    out[3:, 3:] = dm * np.eye(3)
    return out


@functools.lru_cache(maxsize=CACHE_SIZE)
def chain_dynamics(model: ModelSpec) -> ChainDynamics:
    """
    Shared dynamics engine of a model (models are immutable and hashable).
    """
    return ChainDynamics(model)


def mass_matrix(model: ModelSpec, q: np.ndarray) -> np.ndarray:
    return chain_dynamics(model).mass_matrix(q)


def bias_forces(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray
) -> np.ndarray:
    return chain_dynamics(model).bias_forces(q, qdot)


def forward_dynamics(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray, u: np.ndarray
) -> np.ndarray:
    return chain_dynamics(model).forward_dynamics(q, qdot, u)


def inverse_dynamics(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray, qddot: np.ndarray
) -> np.ndarray:
    return chain_dynamics(model).inverse_dynamics(q, qdot, qddot)


def tip_state(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    return chain_dynamics(model).tip_state(q, qdot)


def angular_momentum_about_pivot(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray
) -> np.ndarray:
    return chain_dynamics(model).angular_momentum_about_pivot(q, qdot)


def dynamics_partials(
    model: ModelSpec, q: np.ndarray, qdot: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Partials of qddot with respect to q, qdot and u at one state.

    Returns:
        (d_q, d_qdot, d_u) with shapes (n_q, n_q), (n_q, n_q), (n_q, n_u).
    """
    ev = chain_dynamics(model).evaluate(q, qdot, u, derivatives=True)
    if np.ndim(q) == 1:
        return ev.d_q[0], ev.d_qdot[0], ev.d_u[0]
    return ev.d_q, ev.d_qdot, ev.d_u


def dynamics_partials_lengths(
    model: ModelSpec,
    q: np.ndarray,
    qdot: np.ndarray,
    u: np.ndarray,
    lengths: Sequence[float],
) -> np.ndarray:
    """
    Partial of qddot with respect to the vertebral lengths (mass and inertia
    rebuilt from the linear density).

    Args:
        model:      Template model (fixes density, cross section, n_links).
        lengths:    Vertebral lengths at which to differentiate.

    Returns:
        (n_q, n_l) matrix, or (K, n_q, n_l) for batched states.

    Raises:
        DimensionError: If the lengths are not n_links values within
                        [LENGTH_LOWER_BOUND, total length - (n_links - 1)
                        LENGTH_LOWER_BOUND].
    """
    L = np.asarray(lengths, dtype=float)
    upper = model.total_length - (model.n_links - 1) * LENGTH_LOWER_BOUND
    if L.shape == (model.n_links,) and (
        np.any(L < LENGTH_LOWER_BOUND - _LENGTH_TOL)
        or np.any(L > upper + _LENGTH_TOL)
    ):
        raise DimensionError(
            f"vertebral lengths must lie in [{LENGTH_LOWER_BOUND}, "
            f"{upper:.6g}] m, got {L.tolist()}"
        )
    ev = chain_dynamics(model).evaluate(
        q, qdot, u, lengths=lengths, length_derivatives=True
    )
    return ev.d_lengths[0] if np.ndim(q) == 1 else ev.d_lengths
