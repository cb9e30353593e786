"""
Prediction intervals over replicated runs, read off the sorted run values.
"""

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from config.settings import MIN_INTERVAL_VALUES, PREDICTION_LEVELS, QUANTILE_TOL
from data.models.scenario import RunResult
from utils.errors import DomainError, ShapeError


def _bounds(level: float) -> tuple[float, float]:
    if level > 1.0:
        level = level / 100.0
    for known, bounds in PREDICTION_LEVELS.items():
        if abs(known - level) < 1e-9:
            return bounds
    if not 0.0 < level < 1.0:
        raise DomainError(f"Interval level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    return tail, 1.0 - tail


def _rank(q: float, n: int) -> int:
    """1-based order statistic ceil(q * n), clamped to 1..n."""
    return min(max(math.ceil(q * n - QUANTILE_TOL), 1), n)


def prediction_intervals(values: ArrayLike, level: float) -> tuple[float, float]:
    """
    Interval between two order statistics of the run values.

    For 100 values the 90% interval is (5th, 95th) and the 80% interval
    (10th, 90th); other sizes use ranks ceil(0.05 n), ceil(0.95 n) and so on.

    Raises:
        ShapeError: fewer than MIN_INTERVAL_VALUES values
    """
    ordered = np.sort(np.asarray(values, dtype=float).ravel())
    n = ordered.size
    if n < MIN_INTERVAL_VALUES:
        raise ShapeError(f"prediction_intervals needs >= {MIN_INTERVAL_VALUES} values, got {n}")
    lo, hi = _bounds(level)
    return float(ordered[_rank(lo, n) - 1]), float(ordered[_rank(hi, n) - 1])


def summarize_values(values: ArrayLike) -> dict[str, Any]:
    """Median plus 80% and 90% intervals (intervals omitted below the minimum count)."""
    data = np.asarray(values, dtype=float)
    summary: dict[str, Any] = {"median": float(np.median(data)) if data.size else None}
    enough = data.size >= MIN_INTERVAL_VALUES
    for level in PREDICTION_LEVELS:
        key = f"pi{round(level * 100)}"
        summary[key] = list(prediction_intervals(data, level)) if enough else None
    return summary


def summarize_runs(results: Sequence[RunResult]) -> dict[str, Any]:
    """Median and intervals of every run indicator, uptake per period included."""
    uptake = np.array([r.generic_uptake_by_period for r in results])
    return {
        "n_runs": len(results),
        "total_dc": summarize_values([float(r.dc.sum()) for r in results]),
        "total_dc_scaled": summarize_values([r.total_dc_scaled for r in results]),
        "mean_ndc": summarize_values([r.mean_ndc for r in results]),
        "ever_generic_proportion": summarize_values([r.ever_generic_proportion for r in results]),
        "generic_uptake_by_period": [
            summarize_values(uptake[:, j]) for j in range(uptake.shape[1] if uptake.size else 0)
        ],
    }
