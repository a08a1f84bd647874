#  Copyright (c) Michele De Stefano - 2026.
"""
Exceptions raised by the tailopt package.

Every error derives from TailOptError, so callers (the command-line driver
in particular) can catch the whole family at once.
"""

import numpy as np


class TailOptError(Exception):
    """
    Root of all the errors raised by tailopt.
    """


class ModelConfigError(TailOptError, ValueError):
    """
    Invalid model parameters or malformed model config text.
    """

    field: str | None
    line: int | None
    column: int | None

    def __init__(
        self,
        message: str,
        field: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        location = ""
        if line is not None:
            location = f" (line {line}, column {column})"
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}{location}")
        self.field = field
        self.line = line
        self.column = column


class DimensionError(TailOptError, ValueError):
    """
    An array does not have the shape required by the model.
    """


class SingularConfigurationError(TailOptError, ArithmeticError):
    """
    The configuration sits on a representation singularity (the mass matrix
    is not positive definite), or two collision sphere centers coincide.
    """


class HorizonError(TailOptError, ValueError):
    """
    A time value lies outside the horizon of a trajectory.
    """


class TargetSamplingError(TailOptError, RuntimeError):
    """
    Rejection sampling of a target trajectory exhausted its retries.
    """


class TranscriptionError(TailOptError, ValueError):
    """
    The optimal-control problem cannot be transcribed as requested.
    """


class NonFiniteError(TailOptError, FloatingPointError):
    """
    NaN or Inf found while evaluating a function of the decision vector.
    """

    index: int | None
    iterate: np.ndarray | None

    def __init__(
        self,
        message: str,
        index: int | None = None,
        iterate: np.ndarray | None = None,
    ) -> None:
        suffix = ""
        if index is not None:
            suffix = f" (first offending index: {index})"
        super().__init__(f"{message}{suffix}")
        self.index = index
        self.iterate = iterate


class IntegrationError(TailOptError, RuntimeError):
    """
    The forward integrator failed (typically a step-size underflow).
    """

    time: float
    state: np.ndarray

    def __init__(self, message: str, time: float, state: np.ndarray) -> None:
        super().__init__(f"{message} at t = {time:.6g} s")
        self.time = time
        self.state = state


class MultiStartError(TailOptError, RuntimeError):
    """
    None of the multi-start runs produced a feasible solution.
    """

    diagnostics: list[dict]

    def __init__(self, message: str, diagnostics: list[dict]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class StatisticsError(TailOptError, ValueError):
    """
    The samples are degenerate for the requested statistical test.
    """


def check_finite(
    values: np.ndarray, what: str, iterate: np.ndarray | None = None
) -> None:
    """
    Raises NonFiniteError if values contains NaN or Inf.

    Args:
        values:     Array to check.
        what:       Human-readable name of the quantity, used in the message.
        iterate:    Optional decision vector attached to the error.
    """
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size > 0:
        raise NonFiniteError(
            f"non-finite value in {what}", index=int(bad[0]), iterate=iterate
        )
