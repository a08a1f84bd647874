#  Copyright (c) Michele De Stefano - 2026.
"""
Random target trajectories for the torso orientation.

Every axis follows a fifth-degree Fourier series

    theta(t) = a0 + sum_j [a_j cos(j w t) + b_j sin(j w t)],  j = 1..5

with a0 = -sum_j a_j, so that the target starts from zero.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from os import PathLike
from typing import IO

import numpy as np
import pandas as pd

from .errors import HorizonError, TargetSamplingError

logger = logging.getLogger(__name__)

DEGREE: int = 5
N_AXES: int = 3
DURATION: float = 0.5  # s
ANGLE_BOUND: float = math.pi  # rad
RATE_BOUND: float = 2.0 * math.pi  # rad/s
OMEGA_RANGE: tuple[float, float] = (math.pi, 4.0 * math.pi)  # rad/s

# Resolution of the grid on which sampled targets are checked.
CHECK_STEP: float = 1e-3  # s

CSV_COLUMNS: list[str] = (
    ["trial_id", "axis"]
    + [f"a{j}" for j in range(DEGREE + 1)]
    + [f"b{j}" for j in range(1, DEGREE + 1)]
    + ["omega"]
)

_HORIZON_SLACK: float = 1e-12


@dataclass(frozen=True, eq=False)
class FourierTarget:
    """
    Target torso orientation (roll, pitch, yaw) over [0, duration].

    Attributes:
        a:          (3, 6) cosine coefficients a0..a5 per axis, rad.
        b:          (3, 5) sine coefficients b1..b5 per axis, rad.
        omega:      (3,) fundamental frequency per axis, rad/s.
        duration:   Horizon length, s.
    """

    a: np.ndarray
    b: np.ndarray
    omega: np.ndarray
    duration: float = DURATION

    def evaluate(self, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Evaluates the target and its time derivative.

        Args:
            t:  A time instant or an array of time instants, s.

        Returns:
            (theta, theta_dot): (3,) arrays for a scalar t, otherwise
            (len(t), 3) arrays, in rad and rad/s.

        Raises:
            HorizonError:   If some t is outside [0, duration].
        """
        times = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(times < -_HORIZON_SLACK) or np.any(
            times > self.duration + _HORIZON_SLACK
        ):
            raise HorizonError(
                f"t must be in [0, {self.duration}], got "
                f"[{times.min()}, {times.max()}]"
            )
        j = np.arange(1, DEGREE + 1)
        # phase[k, i, j] = j * omega_i * t_k
        jw = self.omega[:, None] * j[None, :]
        phase = times[:, None, None] * jw[None, :, :]
        cos, sin = np.cos(phase), np.sin(phase)
        a, b = self.a[:, 1:], self.b
        theta = self.a[:, 0] + np.sum(a * cos + b * sin, axis=2)
        theta_dot = np.sum(jw * (b * cos - a * sin), axis=2)
        if np.ndim(t) == 0:
            return theta[0], theta_dot[0]
        return theta, theta_dot

    @property
    def final_orientation(self) -> np.ndarray:
        theta, _ = self.evaluate(self.duration)
        return theta

    def same_coefficients(self, other: "FourierTarget") -> bool:
        return (
            np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.omega, other.omega)
            and self.duration == other.duration
        )


def eval_target(
    target: FourierTarget, t: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Target orientation and angular rate at time(s) t. See
    FourierTarget.evaluate.
    """
    return target.evaluate(t)


def sample_target(
    seed: int | Sequence[int],
    max_retries: int = 100,
    duration: float = DURATION,
) -> FourierTarget:
    """
    Samples a random target whose angles stay within +/- pi rad and whose
    rates stay within +/- 2 pi rad/s.

    The raw coefficients are scaled so that the sufficient L1 conditions
    sum_j (2|a_j| + |b_j|) <= pi and sum_j j w (|a_j| + |b_j|) <= 2 pi hold
    (the factor 2 accounts for a0), then the target is checked on a 1 ms
    grid and resampled if it fails.

    Args:
        seed:           Integer seed, or a sequence of integers (e.g.
                        [batch_seed, index]).
        max_retries:    Number of samples to draw before giving up.
        duration:       Horizon length, s.

    Returns:
        The target.

    Raises:
        TargetSamplingError:    If no admissible target was drawn.
    """
    rng = np.random.default_rng(seed)
    grid = np.arange(0.0, duration + 0.5 * CHECK_STEP, CHECK_STEP)
    j = np.arange(1, DEGREE + 1)
    for attempt in range(max_retries):
        omega = rng.uniform(*OMEGA_RANGE, size=N_AXES)
        a_raw = rng.normal(size=(N_AXES, DEGREE)) / j
        b_raw = rng.normal(size=(N_AXES, DEGREE)) / j
        # Fraction of the admissible amplitude used on every axis.
        fill = rng.uniform(0.2, 1.0, size=N_AXES)

        angle_norm = np.sum(2.0 * np.abs(a_raw) + np.abs(b_raw), axis=1)
        rate_norm = omega * np.sum(j * (np.abs(a_raw) + np.abs(b_raw)), axis=1)
        if np.any(angle_norm == 0.0):
            continue
        scale = fill * np.minimum(
            ANGLE_BOUND / angle_norm, RATE_BOUND / rate_norm
        )
        a_tail = a_raw * scale[:, None]
        b = b_raw * scale[:, None]
        a = np.concatenate([-np.sum(a_tail, axis=1, keepdims=True), a_tail], 1)
        target = FourierTarget(a=a, b=b, omega=omega, duration=duration)

        theta, theta_dot = target.evaluate(grid)
        if np.all(np.abs(theta) <= ANGLE_BOUND) and np.all(
            np.abs(theta_dot) <= RATE_BOUND
        ):
            return target
        logger.debug(f"Target rejected at attempt {attempt}")
    raise TargetSamplingError(
        f"no admissible target after {max_retries} attempts (seed {seed})"
    )


def gen_batch(seed: int, count: int) -> list[FourierTarget]:
    """
    Samples a reproducible batch of targets. Target i uses the RNG stream
    derived from (seed, i), so any subset can be regenerated independently.

    Args:
        seed:   Batch seed.
        count:  Number of targets, at least 1.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    targets = [sample_target([seed, i]) for i in range(count)]
    logger.info(f"Generated {count} targets with seed {seed}")
    return targets


def targets_to_frame(targets: Sequence[FourierTarget]) -> pd.DataFrame:
    rows = []
    for trial_id, target in enumerate(targets):
        for axis in range(N_AXES):
            rows.append(
                [trial_id, axis]
                + list(target.a[axis])
                + list(target.b[axis])
                + [target.omega[axis]]
            )
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def save_targets(
    targets: Sequence[FourierTarget], path_or_buf: str | PathLike | IO
) -> None:
    """
    Writes targets to CSV (one row per target and axis, radians).
    """
    targets_to_frame(targets).to_csv(path_or_buf, index=False)


def load_targets(
    path_or_buf: str | PathLike | IO, duration: float = DURATION
) -> list[FourierTarget]:
    """
    Reads targets written by save_targets. Coefficients are restored
    bit-exactly.

    Raises:
        ValueError: If columns are missing or an axis row is missing.
    """
    frame = pd.read_csv(path_or_buf, float_precision="round_trip")
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"targets CSV lacks columns {missing}")
    targets = []
    for trial_id, rows in frame.groupby("trial_id", sort=True):
        rows = rows.sort_values("axis")
        if list(rows["axis"]) != list(range(N_AXES)):
            raise ValueError(f"trial {trial_id} does not have exactly 3 axes")
        targets.append(
            FourierTarget(
                a=rows[CSV_COLUMNS[2 : 3 + DEGREE]].to_numpy(dtype=float),
                b=rows[CSV_COLUMNS[3 + DEGREE : 3 + 2 * DEGREE]].to_numpy(
                    dtype=float
                ),
                omega=rows["omega"].to_numpy(dtype=float),
                duration=duration,
            )
        )
    return targets
