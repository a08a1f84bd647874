#  Copyright (c) Michele De Stefano - 2026.
import io
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from tailopt.errors import StatisticsError
from tailopt.morphometrics import (
    VertebralSeries,
    compare_groups,
    load_series,
    max_neighbor_diff,
    normalize,
    paired_t_test,
    welch_t_test,
)


def test_normalize_and_largest_jump() -> None:
    # given
    series = VertebralSeries(
        species="Acinonyx jubatus",
        group="inertial_maneuvering",
        lengths=(10.0, 15.0, 21.0, 18.0),
    )

    # when
    normalized = normalize(series)

    # then
    np.testing.assert_allclose(normalized, [1.0, 1.5, 2.1, 1.8])
    assert max_neighbor_diff(normalized) == pytest.approx(0.6)


def test_normalize_rejects_bad_series() -> None:
    with pytest.raises(ValueError):
        normalize([])
    with pytest.raises(ValueError):
        normalize([0.0, 1.0])
    with pytest.raises(ValueError):
        max_neighbor_diff([1.0])


def test_series_validation() -> None:
    with pytest.raises(ValueError):
        VertebralSeries("Felis catus", "arboreal", (1.0, 2.0))
    with pytest.raises(ValueError):
        VertebralSeries("Felis catus", "nonspecialist", ())
    with pytest.raises(ValueError):
        VertebralSeries("Felis catus", "nonspecialist", (1.0, -2.0))


def test_welch_test() -> None:
    # when
    result = welch_t_test([1.0, 2.0, 3.0], [2.0, 4.0, 6.0, 8.0])

    # then
    assert result.t == pytest.approx(-3.0 / math.sqrt(2.0))
    assert result.df == pytest.approx(4.0 / (1.0 / 18.0 + 25.0 / 27.0))
    assert 0.0 < result.p < 1.0


def test_welch_test_reference_values() -> None:
    # when
    result = welch_t_test([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])

    # then
    assert result.t == pytest.approx(-2.0 / math.sqrt(5.0 / 3.0))
    assert result.df == pytest.approx(50.0 / 17.0)
    assert result.t == pytest.approx(-1.549, abs=1e-3)
    assert result.df == pytest.approx(2.941, abs=1e-3)
    assert result.p == pytest.approx(0.2209, abs=1e-3)


def test_welch_test_identical_samples() -> None:
    # when
    result = welch_t_test([0.3, 0.5, 0.9], [0.3, 0.5, 0.9])

    # then
    assert result.t == 0.0
    assert result.p == pytest.approx(1.0)


def test_welch_test_symmetry_and_shift() -> None:
    # given
    a = [0.3, 0.9, 0.4, 0.7]
    b = [0.1, 0.2, 0.15]

    # when
    forward = welch_t_test(a, b)
    backward = welch_t_test(b, a)
    shifted = welch_t_test(np.add(a, 5.0), np.add(b, 5.0))

    # then
    assert backward.t == pytest.approx(-forward.t)
    assert backward.df == pytest.approx(forward.df)
    assert backward.p == pytest.approx(forward.p)
    assert shifted.t == pytest.approx(forward.t)
    assert shifted.df == pytest.approx(forward.df)


def test_welch_test_degenerate_samples() -> None:
    with pytest.raises(StatisticsError):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(StatisticsError):
        welch_t_test([1.0, 1.0], [2.0, 2.0, 2.0])


def test_paired_test() -> None:
    # when
    result = paired_t_test([1.0, 2.0, 3.0, 4.0], [0.5, 1.8, 2.1, 3.9])

    # then
    assert result.t == pytest.approx(2.36507, rel=1e-5)
    assert result.df == 3.0


def test_paired_test_errors() -> None:
    with pytest.raises(StatisticsError):
        paired_t_test([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(StatisticsError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(StatisticsError):
        paired_t_test([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])


def test_load_series_orders_vertebrae(morphometrics_path: Path) -> None:
    # when
    series = load_series(morphometrics_path)

    # then
    by_species = {s.species: s for s in series}
    assert len(series) == 7
    assert by_species["Sciurus vulgaris"].lengths == (10.0, 19.1)
    assert by_species["Lepus europaeus"].group == "nonspecialist"


def test_load_series_rejects_missing_columns() -> None:
    with pytest.raises(ValueError):
        load_series(io.StringIO("species,group\nFelis catus,nonspecialist\n"))


def test_load_series_rejects_mixed_groups() -> None:
    # given
    text = (
        "species,group,vertebra_index,centrum_length_mm\n"
        "Felis catus,nonspecialist,1,10.0\n"
        "Felis catus,inertial_maneuvering,2,11.0\n"
    )

    # then
    with pytest.raises(ValueError):
        load_series(io.StringIO(text))


def test_compare_groups(morphometrics_path: Path, caplog) -> None:
    # given
    series = load_series(morphometrics_path)

    # when
    with caplog.at_level(logging.WARNING):
        comparison = compare_groups(series)

    # then
    statistics = comparison.statistics.set_index("species")
    assert "Lepus europaeus" not in statistics.index
    assert "Lepus europaeus" in caplog.text
    assert statistics.loc["Sciurus vulgaris", "max_neighbor_diff"] == (
        pytest.approx(0.91)
    )
    assert statistics.loc["Dipodomys ordii", "max_neighbor_diff"] == (
        pytest.approx(0.8)
    )
    assert comparison.group_means["inertial_maneuvering"] == pytest.approx(
        0.77
    )
    assert comparison.group_means["nonspecialist"] == pytest.approx(0.15)
    assert comparison.test.t == pytest.approx(6.5113, rel=1e-3)
    assert comparison.test.df == pytest.approx(2.4008, rel=1e-3)
    assert comparison.test.p < 0.05


def test_compare_needs_two_groups() -> None:
    # given
    series = [
        VertebralSeries("Canis lupus", "nonspecialist", (10.0, 11.0)),
        VertebralSeries("Sus scrofa", "nonspecialist", (10.0, 12.0)),
    ]

    # then
    with pytest.raises(StatisticsError):
        compare_groups(series)
