"""
Discrete virtual baseline generator.

The joint law is factorized as f(categorical configuration) x f(continuous |
configuration): each observed combination of categorical labels keeps its
empirical proportion and its own multivariate normal fitted on its rows.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from core.stats import CovarianceMatrix, mvn_sample
from data.models.dataset import ColumnSchema, MixedDataset
from utils.errors import ShapeError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

Configuration = tuple[str, ...]


@dataclass(frozen=True)
class ConfigurationEntry:
    """Probability and conditional Gaussian of one categorical configuration."""

    probability: float
    mean: np.ndarray
    cov: CovarianceMatrix
    n_rows: int = 0
    pooled: bool = False


@dataclass(frozen=True)
class DiscreteVBGModel:
    schema: list[ColumnSchema]
    config_table: dict[Configuration, ConfigurationEntry]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    @property
    def categorical_names(self) -> list[str]:
        return [col.name for col in self.schema if col.is_categorical]

    @property
    def continuous_names(self) -> list[str]:
        return [col.name for col in self.schema if not col.is_categorical]


def _covariance(values: np.ndarray) -> np.ndarray:
    k = values.shape[1]
    if values.shape[0] < 2:
        return np.zeros((k, k))
    return np.atleast_2d(np.cov(values, rowvar=False, ddof=1)).reshape(k, k)


def _pooled_covariance(groups: list[np.ndarray], k: int) -> np.ndarray:
    """Within-configuration pooled covariance (denominator n - number of groups)."""
    n = sum(g.shape[0] for g in groups)
    dof = n - len(groups)
    if dof <= 0:
        return np.zeros((k, k))
    scatter = np.zeros((k, k))
    for g in groups:
        centered = g - g.mean(axis=0)
        scatter += centered.T @ centered
    return scatter / dof


def fit_discrete(data: MixedDataset) -> DiscreteVBGModel:
    """
    Fit configuration proportions and per-configuration Gaussians.

    Configurations with fewer than (continuous dimension + 1) rows keep their own
    mean but take the pooled within-configuration covariance; a diagnostic names
    each of them.
    """
    if data.n == 0:
        raise ShapeError("Cannot fit a discrete generator on an empty dataset")

    cat_names = [col.name for col in data.categorical_columns]
    cont_names = [col.name for col in data.continuous_columns]
    k = len(cont_names)
    continuous = data.to_numeric(cont_names)

    if cat_names:
        frame = data.frame[cat_names].astype(str)
        labels = list(frame.itertuples(index=False, name=None))
    else:
        labels = [()] * data.n

    groups: dict[Configuration, list[int]] = {}
    for row, key in enumerate(labels):
        groups.setdefault(key, []).append(row)

    group_values = {key: continuous[rows] for key, rows in sorted(groups.items())}
    pooled = _pooled_covariance(list(group_values.values()), k)

    diagnostics: list[str] = []
    table: dict[Configuration, ConfigurationEntry] = {}
    for key, values in group_values.items():
        n_rows = values.shape[0]
        is_sparse = n_rows < k + 1
        if is_sparse:
            message = (
                f"configuration {key} has {n_rows} rows (< {k + 1}); using pooled covariance"
            )
            diagnostics.append(message)
            logger.warning(f"⚠️ {message}")
        cov = pooled if is_sparse else _covariance(values)
        table[key] = ConfigurationEntry(
            probability=n_rows / data.n,
            mean=values.mean(axis=0) if k else np.zeros(0),
            cov=CovarianceMatrix(cov),
            n_rows=n_rows,
            pooled=is_sparse,
        )

    logger.info(f"✅ Discrete generator fitted: {len(table)} configurations, {k} continuous")
    return DiscreteVBGModel(list(data.schema), table, tuple(diagnostics))


def sample_discrete(
    model: DiscreteVBGModel, n: int, seed: int | np.random.Generator
) -> MixedDataset:
    """Draw a configuration per row, then its continuous values from that configuration."""
    rng = make_rng(seed)
    keys = list(model.config_table)
    probs = np.array([model.config_table[key].probability for key in keys])
    probs = probs / probs.sum()
    drawn = rng.choice(len(keys), size=int(n), p=probs)

    cat_names = model.categorical_names
    cont_names = model.continuous_names
    continuous = np.zeros((int(n), len(cont_names)))
    categorical = np.empty((int(n), len(cat_names)), dtype=object)
    for index, key in enumerate(keys):
        rows = np.flatnonzero(drawn == index)
        if rows.size == 0:
            continue
        entry = model.config_table[key]
        continuous[rows] = mvn_sample(entry.mean, entry.cov, rows.size, rng)
        if cat_names:
            categorical[rows] = key

    values: dict[str, object] = {}
    for j, name in enumerate(cont_names):
        values[name] = continuous[:, j]
    for j, name in enumerate(cat_names):
        values[name] = categorical[:, j]
    frame = pd.DataFrame(values, columns=[col.name for col in model.schema])
    return MixedDataset(model.schema, frame)
