#  Copyright (c) Michele De Stefano - 2026.
"""
Batched spatial-vector algebra.

Spatial vectors are ordered (angular, linear). Every function works on
stacks: the trailing axis holds the 6 (or 3) components and all the leading
axes broadcast, so one call processes all the collocation samples at once.
"""

import numpy as np


def rotation(axis: int, angle: np.ndarray) -> np.ndarray:
    """
    Active rotation matrices about a coordinate axis.

    Args:
        axis:   0, 1 or 2 for X, Y or Z.
        angle:  Angles (any shape), rad.

    Returns:
        Array of shape angle.shape + (3, 3). Each matrix maps child-frame
        coordinates to parent-frame coordinates.
    """
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)
    s = np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    i, j = (axis + 1) % 3, (axis + 2) % 3
    out[..., axis, axis] = 1.0
    out[..., i, i] = c
    out[..., j, j] = c
    out[..., i, j] = -s
    out[..., j, i] = s
    return out


def motion_transform(E: np.ndarray, r: np.ndarray) -> np.ndarray:
    """
    Plücker transform from parent to child coordinates.

    Args:
        E:  (..., 3, 3) rotation from parent to child coordinates.
        r:  (..., 3) position of the child origin in parent coordinates.

    Returns:
        (..., 6, 6) matrix [[E, 0], [-E r×, E]].
    """
    E = np.asarray(E, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), E.shape[:-2] + (3,))
    out = np.zeros(E.shape[:-2] + (6, 6))
    out[..., :3, :3] = E
    out[..., 3:, 3:] = E
    out[..., 3:, :3] = -E @ skew(r)
    return out


def skew(r: np.ndarray) -> np.ndarray:
    """
    Stacked cross-product matrices, (..., 3) -> (..., 3, 3).
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape + (3,))
    out[..., 0, 1] = -r[..., 2]
    out[..., 0, 2] = r[..., 1]
    out[..., 1, 0] = r[..., 2]
    out[..., 1, 2] = -r[..., 0]
    out[..., 2, 0] = -r[..., 1]
    out[..., 2, 1] = r[..., 0]
    return out


def cross_motion(v: np.ndarray, m: np.ndarray) -> np.ndarray:
    """
    Spatial cross product of motion vectors, v × m.
    """
    v = np.asarray(v)
    m = np.asarray(m)
    w, vl = v[..., :3], v[..., 3:]
    mw, ml = m[..., :3], m[..., 3:]
    return np.concatenate(
        [np.cross(w, mw), np.cross(w, ml) + np.cross(vl, mw)], axis=-1
    )


def cross_force(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    """
    Spatial cross product of a motion vector with a force vector, v ×* f.
    """
    v = np.asarray(v)
    f = np.asarray(f)
    w, vl = v[..., :3], v[..., 3:]
    n, fl = f[..., :3], f[..., 3:]
    return np.concatenate(
        [np.cross(w, n) + np.cross(vl, fl), np.cross(w, fl)], axis=-1
    )


def apply(X: np.ndarray, m: np.ndarray) -> np.ndarray:
    """
    X @ m for stacks of transforms (K, 6, 6) and vectors (K, 6) or
    tangent stacks (K, P, 6).
    """
    if m.ndim == X.ndim - 1:
        return np.einsum("kij,kj->ki", X, m)
    return np.einsum("kij,kpj->kpi", X, m)


def apply_transpose(X: np.ndarray, f: np.ndarray) -> np.ndarray:
    """
    X.T @ f for stacks, with the same shape rules as apply.
    """
    if f.ndim == X.ndim - 1:
        return np.einsum("kji,kj->ki", X, f)
    return np.einsum("kji,kpj->kpi", X, f)


def congruence(X: np.ndarray, inertia: np.ndarray) -> np.ndarray:
    """
    X.T @ inertia @ X for stacks of (K, 6, 6) matrices.
    """
    return np.einsum("kji,kjl,klm->kim", X, inertia, X)
