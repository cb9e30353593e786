"""
Numerical kernels shared by the generators, execution models and analytics.

Normal distribution functions come from ``scipy.special`` (``ndtr``/``ndtri``),
rank correlation from ``scipy.stats.kendalltau`` (tau-b). The Cholesky
factorization is written out because estimated covariances are often only
positive semi-definite and numpy's routine rejects singular matrices.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special, stats

from config.settings import PSD_PIVOT_TOL, SYMMETRY_TOL
from utils.errors import DomainError, NotPSDError, ShapeError, UndefinedCorrelationError
from utils.seeding import make_rng

# =============================================================================
# Normal distribution
# =============================================================================


def std_normal_cdf(x: ArrayLike) -> float | NDArray[np.float64]:
    """Standard normal CDF; raises DomainError on non-finite input."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"std_normal_cdf expects finite input, got {x!r}")
    result = special.ndtr(arr)
    return float(result) if result.ndim == 0 else result


def std_normal_quantile(p: ArrayLike) -> float | NDArray[np.float64]:
    """Inverse of the standard normal CDF on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"std_normal_quantile expects 0 < p < 1, got {p!r}")
    result = special.ndtri(arr)
    return float(result) if result.ndim == 0 else result


# =============================================================================
# Covariance matrices
# =============================================================================


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric covariance matrix; symmetry is checked on construction."""

    entries: NDArray[np.float64]

    def __post_init__(self) -> None:
        m = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"Covariance matrix must be square, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if not np.allclose(m, m.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
            raise DomainError("Covariance matrix is not symmetric")
        object.__setattr__(self, "entries", (m + m.T) / 2.0)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def std(self) -> NDArray[np.float64]:
        return np.sqrt(np.clip(np.diag(self.entries), 0.0, None))

    def to_list(self) -> list[list[float]]:
        return self.entries.tolist()


def _as_matrix(m: CovarianceMatrix | ArrayLike) -> NDArray[np.float64]:
    if isinstance(m, CovarianceMatrix):
        return m.entries
    return CovarianceMatrix(np.asarray(m, dtype=float)).entries


def cholesky_factor(m: CovarianceMatrix | ArrayLike) -> NDArray[np.float64]:
    """
    Lower-triangular L with L @ L.T == m for positive semi-definite m.

    Pivots in [PSD_PIVOT_TOL, 0) are clamped to zero; the column below a zero
    pivot is set to zero.

    Raises:
        NotPSDError: a pivot falls below PSD_PIVOT_TOL
    """
    a = _as_matrix(m)
    d = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - float(lower[j, :j] @ lower[j, :j])
        if pivot < PSD_PIVOT_TOL:
            raise NotPSDError(f"Matrix is not positive semi-definite (pivot {pivot:.3e} at {j})")
        diag = math.sqrt(max(pivot, 0.0))
        lower[j, j] = diag
        if diag > 0.0 and j + 1 < d:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / diag
    return lower


def mvn_sample(
    mean: ArrayLike,
    cov: CovarianceMatrix | ArrayLike,
    n: int,
    rng_seed: int | np.random.Generator,
) -> NDArray[np.float64]:
    """Draw an n x d matrix of multivariate normal rows."""
    mu = np.atleast_1d(np.asarray(mean, dtype=float))
    lower = cholesky_factor(cov)
    if lower.shape[0] != mu.shape[0]:
        raise ShapeError(f"Mean has {mu.shape[0]} entries but covariance is {lower.shape}")
    rng = make_rng(rng_seed)
    z = rng.standard_normal((int(n), mu.shape[0]))
    return mu + z @ lower.T


# =============================================================================
# Rank statistics
# =============================================================================


def kendall_tau(x: ArrayLike, y: ArrayLike) -> float:
    """Tie-corrected Kendall tau-b."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ShapeError(f"kendall_tau needs equal-length sequences, got {xa.shape}, {ya.shape}")
    if xa.size < 2:
        raise ShapeError("kendall_tau needs at least 2 observations")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        raise UndefinedCorrelationError("kendall_tau is undefined for constant input")
    tau = stats.kendalltau(xa, ya, variant="b")[0]
    return float(tau)


def pseudo_observations(
    x: ArrayLike, rng: np.random.Generator | None = None
) -> NDArray[np.float64]:
    """
    Ranks rescaled to rank / (n + 1).

    With ``rng`` given, ties are broken uniformly at random (continuous extension
    of discrete margins); otherwise tied values share their average rank.
    """
    xa = np.asarray(x, dtype=float)
    n = xa.size
    if rng is None:
        ranks = stats.rankdata(xa, method="average")
    else:
        order = np.lexsort((rng.random(n), xa))
        ranks = np.empty(n, dtype=float)
        ranks[order] = np.arange(1, n + 1)
    return ranks / (n + 1.0)


@dataclass(frozen=True)
class EmpiricalMargin:
    """Empirical distribution of one sample, with rank/(n+1) scaling."""

    sorted_values: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.sorted_values, dtype=float))
        if values.size < 1:
            raise ShapeError("EmpiricalMargin needs at least one value")
        object.__setattr__(self, "sorted_values", values)

    @classmethod
    def from_sample(cls, sample: ArrayLike) -> "EmpiricalMargin":
        return cls(np.asarray(sample, dtype=float))

    @property
    def n(self) -> int:
        return int(self.sorted_values.size)


def empirical_cdf(margin: EmpiricalMargin, value: ArrayLike) -> float | NDArray[np.float64]:
    """Count of sample values <= value, divided by n + 1."""
    counts = np.searchsorted(margin.sorted_values, np.asarray(value, dtype=float), side="right")
    result = counts / (margin.n + 1.0)
    return float(result) if np.ndim(result) == 0 else result


def pseudo_inverse(margin: EmpiricalMargin, u: ArrayLike) -> float | NDArray[np.float64]:
    """Smallest sample value whose empirical CDF reaches u (clamped to the sample range)."""
    ua = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(ua)) or np.any(ua <= 0.0) or np.any(ua >= 1.0):
        raise DomainError(f"pseudo_inverse expects 0 < u < 1, got {u!r}")
    # tolerance absorbs k/(n+1) * (n+1) landing a hair above k
    idx = np.ceil(ua * (margin.n + 1.0) - 1e-9).astype(int) - 1
    idx = np.clip(idx, 0, margin.n - 1)
    result = margin.sorted_values[idx]
    return float(result) if np.ndim(result) == 0 else result
