#  Copyright (c) Michele De Stefano - 2026.

import importlib.metadata

from .dynamics import ChainDynamics
from .errors import TailOptError
from .model import ModelSpec, build_uniform_model, build_variable_model
from .solver import SolverConfig, multistart_solve
from .trajgen import FourierTarget, gen_batch, sample_target
from .transcription import Grid, NlpProblem, Solution, build_nlp


def get_pkg_version(pkg_name: str) -> str:  # pragma: no cover
    """
    Retrieves the version of an installed package.

    Args:
        pkg_name: The name of the package.

    Returns:
        The version of the installed package.
        Returns "not-installed" if the package is not installed.
    """
    try:
        version = importlib.metadata.version(pkg_name)
    except importlib.metadata.PackageNotFoundError:
        version = "not-installed"

    return version


__all__ = [
    "ChainDynamics",
    "FourierTarget",
    "Grid",
    "ModelSpec",
    "NlpProblem",
    "Solution",
    "SolverConfig",
    "TailOptError",
    "build_nlp",
    "build_uniform_model",
    "build_variable_model",
    "gen_batch",
    "multistart_solve",
    "sample_target",
]
__version__ = get_pkg_version("tailopt")
