"""
Threshold discretizers and the presets used by the case study and the toy dataset.
"""

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from data.models.dataset import ThresholdDiscretizer
from utils.errors import DomainError

# Viral load: 0 if ARNVIH < 50, 1 if 50 <= ARNVIH < 10,000, 2 otherwise
ARN_DISCRETIZER = ThresholdDiscretizer((50.0, 10_000.0), ("0", "1", "2"), closure="left")

# Creatinine clearance from CGFF: 3 if <= 29, 2 if in ]29; 89], 1 if > 89
CREA_DISCRETIZER = ThresholdDiscretizer((29.0, 89.0), ("3", "2", "1"), closure="right")

# Body mass index classes: <= 25, ]25; 35], > 35
BMI_DISCRETIZER = ThresholdDiscretizer((25.0, 35.0), ("<=25", "25-35", ">35"), closure="right")


def discretize(value: float, d: ThresholdDiscretizer) -> str:
    """Label of the interval containing ``value``."""
    if not math.isfinite(value):
        raise DomainError(f"Cannot discretize non-finite value {value!r}")
    side = "right" if d.closure == "left" else "left"
    index = int(np.searchsorted(d.cut_points, value, side=side))
    return d.output_labels[index]


def discretize_many(values: ArrayLike, d: ThresholdDiscretizer) -> NDArray[np.str_]:
    """Vectorised discretize over an array of values."""
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Cannot discretize non-finite values")
    side = "right" if d.closure == "left" else "left"
    index = np.searchsorted(d.cut_points, arr, side=side)
    return np.asarray(d.output_labels)[index]
