#  Copyright (c) Michele De Stefano - 2026.
"""
Caudal vertebra measurements: normalization, the largest change of length
between neighboring vertebrae, and group comparisons.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from os import PathLike
from typing import IO

import numpy as np
import pandas as pd
import scipy.stats

from .errors import StatisticsError

logger = logging.getLogger(__name__)

GROUPS: tuple[str, ...] = ("inertial_maneuvering", "nonspecialist")
CSV_COLUMNS: list[str] = [
    "species",
    "group",
    "vertebra_index",
    "centrum_length_mm",
]


@dataclass(frozen=True)
class VertebralSeries:
    """
    Centrum lengths of the caudal vertebrae of one species.

    Attributes:
        species:    Species name.
        group:      "inertial_maneuvering" or "nonspecialist".
        lengths:    Centrum lengths (proximal to distal), mm.
    """

    species: str
    group: str
    lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.group not in GROUPS:
            raise ValueError(f"{self.species}: unknown group {self.group!r}")
        if len(self.lengths) == 0:
            raise ValueError(f"{self.species}: no vertebra measured")
        if any(not length > 0.0 for length in self.lengths):
            raise ValueError(f"{self.species}: lengths must be positive")


@dataclass(frozen=True)
class TTestResult:
    """
    Attributes:
        t:  Test statistic.
        df: Degrees of freedom.
        p:  Two-sided p-value.
    """

    t: float
    df: float
    p: float


@dataclass(frozen=True)
class GroupComparison:
    """
    Per-species statistic of two groups and their Welch test.
    """

    statistics: pd.DataFrame
    group_means: dict[str, float]
    test: TTestResult


def normalize(series: VertebralSeries | Sequence[float]) -> np.ndarray:
    """
    Divides every length by the length of the first caudal vertebra.

    Raises:
        ValueError: Empty series or non-positive first length.
    """
    lengths = np.asarray(
        series.lengths if isinstance(series, VertebralSeries) else series,
        dtype=float,
    )
    if lengths.size == 0:
        raise ValueError("cannot normalize an empty series")
    if not lengths[0] > 0.0:
        raise ValueError("the first length must be positive")
    return lengths / lengths[0]


def max_neighbor_diff(normalized: Sequence[float]) -> float:
    """
    Largest absolute difference between adjacent (normalized) lengths.

    Raises:
        ValueError: Fewer than two lengths.
    """
    values = np.asarray(normalized, dtype=float)
    if values.size < 2:
        raise ValueError("at least two lengths are needed")
    return float(np.max(np.abs(np.diff(values))))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """
    Two-sample t-test with unequal variances.

    Returns:
        The Welch statistic, the Welch-Satterthwaite degrees of freedom and
        the two-sided p-value.

    Raises:
        StatisticsError:    Fewer than two values in a sample, or both
                            samples with zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise StatisticsError("each sample needs at least two values")
    va = np.var(a, ddof=1) / a.size
    vb = np.var(b, ddof=1) / b.size
    if va + vb == 0.0:
        raise StatisticsError("both samples have zero variance")
    df = (va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    result = scipy.stats.ttest_ind(a, b, equal_var=False)
    return TTestResult(
        t=float(result.statistic), df=float(df), p=float(result.pvalue)
    )


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """
    Paired t-test on a - b (df = n - 1).

    Raises:
        StatisticsError:    Different sizes, fewer than two pairs, or
                            differences with zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise StatisticsError("paired samples must have the same size")
    if a.size < 2:
        raise StatisticsError("at least two pairs are needed")
    if np.var(a - b, ddof=1) == 0.0:
        raise StatisticsError("the paired differences have zero variance")
    result = scipy.stats.ttest_rel(a, b)
    return TTestResult(
        t=float(result.statistic), df=float(a.size - 1), p=float(result.pvalue)
    )


def load_series(path_or_buf: str | PathLike | IO) -> list[VertebralSeries]:
    """
    Reads a morphometrics CSV (species, group, vertebra_index,
    centrum_length_mm) into one series per species, ordered by vertebra
    index.

    Raises:
        ValueError: Missing columns or inconsistent groups.
    """
    frame = pd.read_csv(path_or_buf)
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"morphometrics CSV lacks columns {missing}")
    series = []
    for species, rows in frame.groupby("species", sort=True):
        groups = rows["group"].unique()
        if len(groups) != 1:
            raise ValueError(f"{species}: rows belong to several groups")
        rows = rows.sort_values("vertebra_index")
        series.append(
            VertebralSeries(
                species=str(species),
                group=str(groups[0]),
                lengths=tuple(rows["centrum_length_mm"].astype(float)),
            )
        )
    return series


def compare_groups(series: Sequence[VertebralSeries]) -> GroupComparison:
    """
    Computes max_neighbor_diff of every normalized series, then compares the
    two groups with the Welch test. Species with a single vertebra are
    skipped with a warning.

    Raises:
        StatisticsError:    If the data do not hold two groups.
    """
    rows = []
    for s in series:
        if len(s.lengths) < 2:
            logger.warning(f"{s.species}: single vertebra, excluded")
            continue
        rows.append(
            {
                "species": s.species,
                "group": s.group,
                "max_neighbor_diff": max_neighbor_diff(normalize(s)),
            }
        )
    statistics = pd.DataFrame(
        rows, columns=["species", "group", "max_neighbor_diff"]
    )
    present = [g for g in GROUPS if g in set(statistics["group"])]
    if len(present) != 2:
        raise StatisticsError("the comparison needs two groups")
    samples = {
        g: statistics.loc[statistics["group"] == g, "max_neighbor_diff"]
        for g in GROUPS
    }
    test = welch_t_test(samples[GROUPS[0]], samples[GROUPS[1]])
    return GroupComparison(
        statistics=statistics,
        group_means={g: float(samples[g].mean()) for g in GROUPS},
        test=test,
    )
