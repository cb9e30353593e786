"""
Continuous virtual baseline generator.

All columns, categoricals recoded to their integer codes, are modeled by one
multivariate normal. A latent draw of categorical column k becomes modality m
when CrV[m-1] < u <= CrV[m], with CrV[m] = mu_k + sd_k * Phi^-1(p_0 + ... + p_m),
CrV[-1] = -inf and CrV[M-1] = +inf, so that modality frequencies match the data.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from config.settings import RIDGE_FACTOR
from core.stats import CovarianceMatrix, mvn_sample, std_normal_quantile
from data.models.dataset import ColumnSchema, MixedDataset
from utils.errors import DomainError, ShapeError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuousVBGModel:
    schema: list[ColumnSchema]
    mean: np.ndarray
    cov: CovarianceMatrix
    # name -> (-inf, CrV_1, ..., CrV_{M-1}, +inf)
    critical_values: dict[str, tuple[float, ...]]
    category_probs: dict[str, tuple[float, ...]]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)


def compute_critical_values(mean: float, sd: float, probs: list[float]) -> tuple[float, ...]:
    """Thresholds bracketing each modality; inner values follow cumulative probabilities."""
    p = np.asarray(probs, dtype=float)
    if p.size < 2 or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
        raise DomainError(f"Category probabilities must be >= 0 and sum to 1, got {probs}")
    inner = []
    for cum in np.cumsum(p)[:-1]:
        if cum <= 0.0:
            inner.append(-math.inf)
        elif cum >= 1.0:
            inner.append(math.inf)
        else:
            inner.append(mean + sd * float(std_normal_quantile(cum)))
    return (-math.inf, *inner, math.inf)


def bracket(values: np.ndarray, critical: tuple[float, ...]) -> np.ndarray:
    """Modality codes m with CrV[m-1] < u <= CrV[m]."""
    inner = np.asarray(critical[1:-1], dtype=float)
    return np.searchsorted(inner, np.asarray(values, dtype=float), side="left")


def fit_continuous(data: MixedDataset) -> ContinuousVBGModel:
    """
    Fit one multivariate normal over all recoded columns and derive critical values.

    A singular covariance gets a ridge of RIDGE_FACTOR * trace / K on the diagonal.
    """
    k = len(data.schema)
    if data.n <= k:
        raise ShapeError(f"fit_continuous needs more rows than columns ({data.n} <= {k})")

    matrix = data.to_numeric()
    mean = matrix.mean(axis=0)
    cov = np.atleast_2d(np.cov(matrix, rowvar=False, ddof=1)).reshape(k, k)
    diagnostics: list[str] = []

    eigenvalues = np.linalg.eigvalsh(cov)
    trace = float(np.trace(cov))
    if eigenvalues.min() <= 1e-12 * max(trace, 1.0):
        ridge = RIDGE_FACTOR * trace / k
        cov = cov + ridge * np.eye(k)
        message = f"singular covariance; added ridge {ridge:.3e} to the diagonal"
        diagnostics.append(message)
        logger.warning(f"⚠️ {message}")

    covariance = CovarianceMatrix(cov)
    critical: dict[str, tuple[float, ...]] = {}
    probs: dict[str, tuple[float, ...]] = {}
    for j, col in enumerate(data.schema):
        if not col.is_categorical:
            continue
        counts = np.bincount(data.values(col.name).astype(int), minlength=len(col.categories))
        p = counts / counts.sum()
        probs[col.name] = tuple(float(x) for x in p)
        critical[col.name] = compute_critical_values(
            float(mean[j]), float(covariance.std[j]), list(p)
        )
        unseen = [label for label, c in zip(col.categories, counts, strict=True) if c == 0]
        if unseen:
            message = f"column '{col.name}': categories {unseen} never observed, never sampled"
            diagnostics.append(message)
            logger.warning(f"⚠️ {message}")

    logger.info(f"✅ Continuous generator fitted: K={k}, {len(critical)} categorical columns")
    return ContinuousVBGModel(
        list(data.schema), mean, covariance, critical, probs, tuple(diagnostics)
    )


def sample_continuous(
    model: ContinuousVBGModel, n: int, seed: int | np.random.Generator
) -> MixedDataset:
    """Latent Gaussian draw; categoricals assigned by critical-value bracketing."""
    rng = make_rng(seed)
    latent = mvn_sample(model.mean, model.cov, int(n), rng)
    for j, col in enumerate(model.schema):
        if col.is_categorical:
            latent[:, j] = bracket(latent[:, j], model.critical_values[col.name])
    return MixedDataset.from_numeric(model.schema, latent)
