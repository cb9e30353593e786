import numpy as np
import pytest

from scenario.intervals import prediction_intervals, summarize_values
from utils.errors import DomainError, ShapeError

VALUES = np.arange(1, 101, dtype=float)


def test_ninety_percent_interval():
    assert prediction_intervals(VALUES, 0.90) == (5.0, 95.0)


def test_eighty_percent_interval():
    assert prediction_intervals(VALUES, 0.80) == (10.0, 90.0)


def test_order_does_not_matter():
    shuffled = np.random.default_rng(0).permutation(VALUES)
    assert prediction_intervals(shuffled, 0.90) == (5.0, 95.0)


def test_percent_levels_are_accepted():
    assert prediction_intervals(VALUES, 80) == (10.0, 90.0)


def test_constant_values():
    assert prediction_intervals(np.full(30, 7.5), 0.90) == (7.5, 7.5)


def test_other_sizes_use_ceiling_ranks():
    values = np.arange(1, 31, dtype=float)
    # ranks ceil(0.05 * 30) = 2 and ceil(0.95 * 30) = 29
    assert prediction_intervals(values, 0.90) == (2.0, 29.0)


def test_too_few_values():
    with pytest.raises(ShapeError):
        prediction_intervals(np.arange(19), 0.90)


def test_invalid_level():
    with pytest.raises(DomainError):
        prediction_intervals(VALUES, 0.0)


def test_summary_of_values():
    summary = summarize_values(VALUES)
    assert summary["median"] == 50.5
    assert summary["pi80"] == [10.0, 90.0]
    assert summary["pi90"] == [5.0, 95.0]
    short = summarize_values([1.0, 2.0, 3.0])
    assert short["median"] == 2.0
    assert short["pi90"] is None
