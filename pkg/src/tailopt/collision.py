#  Copyright (c) Michele De Stefano - 2026.
"""
Self-collision avoidance between torso and tail.

The torso and the tail are over-approximated with spheres, and every pair
(tail sphere, torso sphere) yields the constraint

    g = (r_tail + r_torso) - |c_tail - c_torso| <= 0.

Everything is computed in the torso frame: torso angles move both spheres of
a pair together, so g depends on the tail joint angles (and lengths) only.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import spatial
from .errors import DimensionError, SingularConfigurationError
from .model import ModelSpec

logger = logging.getLogger(__name__)

# Torso spheres of the reference torso (0.3 x 1.0 x 0.3 m): (x, y, z, r).
# The central sphere is larger than the end ones so that the union covers
# the cuboid edges between the sphere centers.
DEFAULT_TORSO_SPHERES: tuple[tuple[float, float, float, float], ...] = (
    (0.0, -0.35, 0.0, 0.26),
    (0.0, 0.0, 0.0, 0.30),
    (0.0, 0.35, 0.0, 0.26),
)
DEFAULT_TAIL_RADIUS: float = 0.08  # m

_LINK_DIRECTION = np.array([0.0, -1.0, 0.0])
_MIN_DISTANCE: float = 1e-12


@dataclass(frozen=True)
class TailSphere:
    """
    Sphere attached to a vertebra.

    Attributes:
        link:       Vertebra index (0 is proximal).
        fraction:   Position of the center along the vertebra, as a fraction
                    of its length (1.0 is the distal end).
        radius:     Radius, m.
    """

    link: int
    fraction: float
    radius: float


@dataclass(frozen=True)
class SphereLayout:
    """
    Collision spheres of a model.

    Attributes:
        torso_centers:  (n_torso, 3) sphere centers in the torso frame, m.
        torso_radii:    (n_torso,) radii, m.
        tail_spheres:   Spheres on the vertebrae, proximal to distal.
    """

    torso_centers: np.ndarray
    torso_radii: np.ndarray
    tail_spheres: tuple[TailSphere, ...]

    @property
    def n_pairs(self) -> int:
        return len(self.tail_spheres) * len(self.torso_radii)

    def pairs(self) -> list[tuple[int, int]]:
        """(tail sphere, torso sphere) index of every constraint, in order."""
        return [
            (i, j)
            for i in range(len(self.tail_spheres))
            for j in range(len(self.torso_radii))
        ]


def default_layout(model: ModelSpec) -> SphereLayout:
    """
    Builds the sphere layout of a model: the torso spheres (from the model
    config, or the reference ones), and one tail sphere at every inter-link
    joint and at the tip. The sphere at the tail base would always overlap
    the torso, so it is left out.
    """
    spheres = model.torso_spheres or DEFAULT_TORSO_SPHERES
    radius = model.tail_sphere_radius or DEFAULT_TAIL_RADIUS
    torso = np.asarray(spheres, dtype=float)
    layout = SphereLayout(
        torso_centers=torso[:, :3],
        torso_radii=torso[:, 3],
        tail_spheres=tuple(
            TailSphere(link=k, fraction=1.0, radius=radius)
            for k in range(model.n_links)
        ),
    )
    logger.debug(f"Collision layout with {layout.n_pairs} pairs")
    return layout


@dataclass(frozen=True)
class _TailFrames:
    origins: list[np.ndarray]  # joint origins, (K, 3)
    pitch_axes: list[np.ndarray]  # (K, 3)
    yaw_axes: list[np.ndarray]  # (K, 3)
    rotations: list[np.ndarray]  # vertebra -> torso rotations, (K, 3, 3)


def _tail_frames(
    model: ModelSpec, q: np.ndarray, lengths: np.ndarray
) -> _TailFrames:
    K = len(q)
    R = np.broadcast_to(np.eye(3), (K, 3, 3))
    origin = np.broadcast_to(np.asarray(model.attach_offset, float), (K, 3))
    frames = _TailFrames([], [], [], [])
    for k in range(model.n_links):
        pitch, yaw = q[:, 3 + 2 * k], q[:, 4 + 2 * k]
        frames.origins.append(origin)
        frames.pitch_axes.append(R[:, :, 0])
        R = R @ spatial.rotation(0, pitch)
        frames.yaw_axes.append(R[:, :, 2])
        R = R @ spatial.rotation(2, yaw)
        frames.rotations.append(R)
        origin = origin + lengths[k] * (R @ _LINK_DIRECTION)
    return frames


def _sphere_centers(
    layout: SphereLayout, frames: _TailFrames, lengths: np.ndarray
) -> np.ndarray:
    """(K, n_tail, 3) tail sphere centers in the torso frame."""
    return np.stack(
        [
            frames.origins[s.link]
            + s.fraction
            * lengths[s.link]
            * (frames.rotations[s.link] @ _LINK_DIRECTION)
            for s in layout.tail_spheres
        ],
        axis=1,
    )


def _prepare(
    model: ModelSpec, q: np.ndarray, lengths: Sequence[float] | None
) -> tuple[np.ndarray, bool, np.ndarray]:
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    qb = q[None, :] if single else q
    if qb.ndim != 2 or qb.shape[1] != model.n_q:
        raise DimensionError(
            f"expected trailing dimension {model.n_q}, got shape {q.shape}"
        )
    L = np.asarray(
        model.link_lengths if lengths is None else lengths, dtype=float
    )
    if L.shape != (model.n_links,):
        raise DimensionError(
            f"expected {model.n_links} lengths, got shape {L.shape}"
        )
    return qb, single, L


def collision_values(
    model: ModelSpec,
    layout: SphereLayout,
    q: np.ndarray,
    lengths: Sequence[float] | None = None,
) -> np.ndarray:
    """
    Collision constraint values (negative means separated).

    Args:
        model:      The model.
        layout:     The sphere layout.
        q:          (n_q,) or (K, n_q) configuration(s), rad.
        lengths:    Vertebral lengths; defaults to the model ones.

    Returns:
        (n_pairs,) or (K, n_pairs) values, m.
    """
    qb, single, L = _prepare(model, q, lengths)
    frames = _tail_frames(model, qb, L)
    centers = _sphere_centers(layout, frames, L)
    radii = np.array([s.radius for s in layout.tail_spheres])
    diff = centers[:, :, None, :] - layout.torso_centers[None, None, :, :]
    distance = np.linalg.norm(diff, axis=3)
    g = (radii[:, None] + layout.torso_radii[None, :]) - distance
    g = g.reshape(len(qb), -1)
    return g[0] if single else g


def collision_jacobian(
    model: ModelSpec,
    layout: SphereLayout,
    q: np.ndarray,
    lengths: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Analytic derivatives of the collision values.

    Returns:
        (dg/dq, dg/dL) with shapes (n_pairs, n_q) and (n_pairs, n_links),
        with a leading sample axis for batched q. The torso-angle columns
        are zero.

    Raises:
        SingularConfigurationError: If two sphere centers coincide.
    """
    qb, single, L = _prepare(model, q, lengths)
    K = len(qb)
    frames = _tail_frames(model, qb, L)
    centers = _sphere_centers(layout, frames, L)
    diff = centers[:, :, None, :] - layout.torso_centers[None, None, :, :]
    distance = np.linalg.norm(diff, axis=3)
    if np.any(distance < _MIN_DISTANCE):
        raise SingularConfigurationError(
            "a tail sphere center coincides with a torso sphere center"
        )
    # dg/dc_tail, (K, n_tail, n_torso, 3)
    dg_dc = -diff / distance[..., None]

    n_tail = len(layout.tail_spheres)
    dc_dq = np.zeros((K, n_tail, 3, model.n_q))
    dc_dL = np.zeros((K, n_tail, 3, model.n_links))
    for i, sphere in enumerate(layout.tail_spheres):
        c = centers[:, i]
        for m in range(sphere.link + 1):
            o = frames.origins[m]
            dc_dq[:, i, :, 3 + 2 * m] = np.cross(frames.pitch_axes[m], c - o)
            dc_dq[:, i, :, 4 + 2 * m] = np.cross(frames.yaw_axes[m], c - o)
            weight = sphere.fraction if m == sphere.link else 1.0
            dc_dL[:, i, :, m] = weight * (frames.rotations[m] @ _LINK_DIRECTION)

    dg_dq = np.einsum("kijx,kixn->kijn", dg_dc, dc_dq).reshape(K, -1, model.n_q)
    dg_dL = np.einsum("kijx,kixn->kijn", dg_dc, dc_dL).reshape(
        K, -1, model.n_links
    )
    if single:
        return dg_dq[0], dg_dL[0]
    return dg_dq, dg_dL
