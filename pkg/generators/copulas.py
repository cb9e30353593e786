"""
Bivariate (pair) copula families: distribution, density, h-functions and fitting.

Supported families are independence, gaussian, clayton, gumbel and frank.
Clayton and Gumbel only model positive dependence, so they come with the usual
rotations (90 and 270 degrees give negative dependence, 180 the survival copula).

Convention: ``h_function(c, u, v)`` is the conditional distribution of U given
V = v, that is dC(u, v)/dv. Formulas are evaluated in log space where the raw
powers overflow for large parameters.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize, special, stats

from config.settings import (
    CLAYTON_THETA_MAX,
    FRANK_THETA_MAX,
    GAUSSIAN_RHO_MAX,
    GUMBEL_THETA_MAX,
    H_CLAMP,
    MIN_PAIR_OBSERVATIONS,
    U_EPS,
)
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

Family = Literal["independence", "gaussian", "clayton", "gumbel", "frank"]
FAMILIES: tuple[Family, ...] = ("independence", "gaussian", "clayton", "gumbel", "frank")
ROTATED_FAMILIES = ("clayton", "gumbel")
ROTATIONS = (0, 90, 180, 270)

@dataclass(frozen=True)
class PairCopula:
    """A parametric bivariate copula."""

    family: Family = "independence"
    theta: float = 0.0
    rotation: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise DomainError(f"Unknown copula family '{self.family}'")
        if self.rotation not in ROTATIONS:
            raise DomainError(f"Rotation must be one of {ROTATIONS}, got {self.rotation}")
        if self.rotation and self.family not in ROTATED_FAMILIES:
            raise DomainError(f"Family '{self.family}' does not take rotations")
        theta = float(self.theta)
        if self.family == "gaussian" and not -1.0 < theta < 1.0:
            raise DomainError(f"Gaussian rho must lie in (-1, 1), got {theta}")
        if self.family == "clayton" and not theta > 0.0:
            raise DomainError(f"Clayton theta must be > 0, got {theta}")
        if self.family == "gumbel" and not theta >= 1.0:
            raise DomainError(f"Gumbel theta must be >= 1, got {theta}")
        if self.family == "frank" and theta == 0.0:
            raise DomainError("Frank theta must be non-zero")
        object.__setattr__(self, "theta", theta)

    @property
    def n_params(self) -> int:
        return 0 if self.family == "independence" else 1

    def kendall_tau(self) -> float:
        """Theoretical Kendall tau of the (rotated) family."""
        t = self.theta
        if self.family == "independence":
            tau = 0.0
        elif self.family == "gaussian":
            tau = 2.0 / np.pi * np.arcsin(t)
        elif self.family == "clayton":
            tau = t / (t + 2.0)
        elif self.family == "gumbel":
            tau = 1.0 - 1.0 / t
        else:
            debye = integrate.quad(lambda s: s / np.expm1(s) if s else 1.0, 0.0, abs(t))[0]
            tau = 1.0 - 4.0 / abs(t) * (1.0 - debye / abs(t))
            tau = tau if t > 0 else -tau
        return -tau if self.rotation in (90, 270) else tau

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "theta": self.theta, "rotation": self.rotation}

    @classmethod
    def from_dict(cls, entry: dict[str, Any]) -> "PairCopula":
        return cls(entry["family"], float(entry.get("theta", 0.0)), int(entry.get("rotation", 0)))


# =============================================================================
# Input checks
# =============================================================================


def _open_unit(name: str, x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"{name} must lie in (0, 1)")
    return arr


def _closed_unit(name: str, x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _out(result: NDArray[np.float64]) -> float | NDArray[np.float64]:
    return float(result) if np.ndim(result) == 0 else result


# =============================================================================
# Unrotated family kernels (u, v strictly inside (0, 1))
# =============================================================================


def _bvn_cdf(h: NDArray[np.float64], k: NDArray[np.float64], rho: float) -> NDArray[np.float64]:
    """Bivariate standard normal CDF through Owen's T function."""
    h = np.where(h == 0.0, 1e-15, h)
    k = np.where(k == 0.0, 1e-15, k)
    s = np.sqrt(1.0 - rho * rho)
    a_h = (k - rho * h) / (h * s)
    a_k = (h - rho * k) / (k * s)
    delta = np.where(h * k < 0.0, 0.5, 0.0)
    value = (
        0.5 * special.ndtr(h)
        + 0.5 * special.ndtr(k)
        - special.owens_t(h, a_h)
        - special.owens_t(k, a_k)
        - delta
    )
    return np.clip(value, 0.0, 1.0)


def _clayton_log_s(lu: NDArray[np.float64], lv: NDArray[np.float64], t: float):
    """log(u^-t + v^-t - 1) from log u and log v."""
    big = np.logaddexp(-t * lu, -t * lv)
    return big + np.log1p(-np.exp(-big))


def _gumbel_parts(u: NDArray[np.float64], v: NDArray[np.float64], t: float):
    x = -np.log(u)
    y = -np.log(v)
    log_a = np.logaddexp(t * np.log(x), t * np.log(y)) / t
    return x, y, log_a


def _frank_terms(u: NDArray[np.float64], v: NDArray[np.float64], t: float):
    a = np.expm1(-t * u)
    b = np.expm1(-t * v)
    c = np.expm1(-t)
    return a, b, c


def _base_cdf(family: str, t: float, u, v):
    if family == "independence":
        return u * v
    if family == "gaussian":
        return _bvn_cdf(special.ndtri(u), special.ndtri(v), t)
    if family == "clayton":
        return np.exp(-_clayton_log_s(np.log(u), np.log(v), t) / t)
    if family == "gumbel":
        _, _, log_a = _gumbel_parts(u, v, t)
        return np.exp(-np.exp(log_a))
    a, b, c = _frank_terms(u, v, t)
    return -np.log1p(a * b / c) / t


def _base_logpdf(family: str, t: float, u, v):
    if family == "independence":
        return np.zeros(np.broadcast(u, v).shape)
    if family == "gaussian":
        x = special.ndtri(u)
        y = special.ndtri(v)
        r2 = 1.0 - t * t
        return -0.5 * np.log(r2) - (t * t * (x * x + y * y) - 2.0 * t * x * y) / (2.0 * r2)
    if family == "clayton":
        lu, lv = np.log(u), np.log(v)
        return (
            np.log1p(t)
            + (-1.0 - t) * (lu + lv)
            + (-1.0 / t - 2.0) * _clayton_log_s(lu, lv, t)
        )
    if family == "gumbel":
        x, y, log_a = _gumbel_parts(u, v, t)
        a = np.exp(log_a)
        return (
            -a
            + x
            + y
            + (t - 1.0) * (np.log(x) + np.log(y))
            + (1.0 - 2.0 * t) * log_a
            + np.log(a + t - 1.0)
        )
    if abs(t) < 1e-8:
        return np.zeros(np.broadcast(u, v).shape)
    a, b, c = _frank_terms(u, v, t)
    return np.log(-t * c) - t * (u + v) - 2.0 * np.log(np.abs(c + a * b))


def _base_h(family: str, t: float, u, v):
    """dC(u, v)/dv for the unrotated family."""
    if family == "independence":
        return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)
    if family == "gaussian":
        return special.ndtr((special.ndtri(u) - t * special.ndtri(v)) / np.sqrt(1.0 - t * t))
    if family == "clayton":
        lu, lv = np.log(u), np.log(v)
        return np.exp((-t - 1.0) * lv + (-1.0 - 1.0 / t) * _clayton_log_s(lu, lv, t))
    if family == "gumbel":
        x, y, log_a = _gumbel_parts(u, v, t)
        return np.exp(-np.exp(log_a) + (1.0 - t) * log_a + (t - 1.0) * np.log(y) + y)
    if abs(t) < 1e-8:
        return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)
    a, b, c = _frank_terms(u, v, t)
    return (b + 1.0) * a / (c + a * b)


def _bisect_h_inverse(family: str, t: float, p, v, iterations: int = 100):
    """Numerical inverse of the unrotated h-function in u (h is increasing in u)."""
    p, v = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(v, dtype=float))
    lo = np.full(p.shape, U_EPS)
    hi = np.full(p.shape, 1.0 - U_EPS)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = _base_h(family, t, mid, v) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < 1e-15):
            break
    return 0.5 * (lo + hi)


def _base_h_inverse(family: str, t: float, p, v):
    """u such that the unrotated h(u | v) = p."""
    if family == "independence":
        return np.broadcast_to(p, np.broadcast(p, v).shape).astype(float)
    if family == "gaussian":
        return special.ndtr(special.ndtri(p) * np.sqrt(1.0 - t * t) + t * special.ndtri(v))
    if family == "clayton":
        k = -t / (t + 1.0) * np.log(p)
        log_s = np.logaddexp(0.0, -t * np.log(v) + np.log(np.expm1(k)))
        return np.exp(-log_s / t)
    if family == "gumbel":
        return _bisect_h_inverse(family, t, p, v)
    if abs(t) < 1e-8:
        return np.broadcast_to(p, np.broadcast(p, v).shape).astype(float)
    ev = np.exp(-t * v)
    return -np.log1p(p * np.expm1(-t) / (ev * (1.0 - p) + p)) / t


# =============================================================================
# Public operations (rotation-aware)
# =============================================================================


def pair_copula_cdf(c: PairCopula, u: ArrayLike, v: ArrayLike) -> float | NDArray[np.float64]:
    """C(u, v); defined on the closed unit square (C(u, 1) = u, C(1, v) = v)."""
    ua = _closed_unit("u", u)
    va = _closed_unit("v", v)
    ua, va = np.broadcast_arrays(ua, va)
    ui = np.clip(ua, U_EPS, 1.0 - U_EPS)
    vi = np.clip(va, U_EPS, 1.0 - U_EPS)
    f, t = c.family, c.theta
    if c.rotation == 0:
        value = _base_cdf(f, t, ui, vi)
    elif c.rotation == 90:
        value = vi - _base_cdf(f, t, 1.0 - ui, vi)
    elif c.rotation == 180:
        value = ui + vi - 1.0 + _base_cdf(f, t, 1.0 - ui, 1.0 - vi)
    else:
        value = ui - _base_cdf(f, t, ui, 1.0 - vi)
    value = np.clip(value, 0.0, 1.0)
    value = np.where(va == 1.0, ua, value)
    value = np.where(ua == 1.0, va, value)
    value = np.where((ua == 0.0) | (va == 0.0), 0.0, value)
    return _out(value)


def pair_copula_logpdf(c: PairCopula, u: ArrayLike, v: ArrayLike) -> float | NDArray[np.float64]:
    ua = _open_unit("u", u)
    va = _open_unit("v", v)
    f, t = c.family, c.theta
    if c.rotation == 0:
        value = _base_logpdf(f, t, ua, va)
    elif c.rotation == 90:
        value = _base_logpdf(f, t, 1.0 - ua, va)
    elif c.rotation == 180:
        value = _base_logpdf(f, t, 1.0 - ua, 1.0 - va)
    else:
        value = _base_logpdf(f, t, ua, 1.0 - va)
    return _out(np.asarray(value, dtype=float))


def pair_copula_pdf(c: PairCopula, u: ArrayLike, v: ArrayLike) -> float | NDArray[np.float64]:
    """Copula density c(u, v) >= 0."""
    return _out(np.exp(np.asarray(pair_copula_logpdf(c, u, v), dtype=float)))


def _clamp_h(
    c: PairCopula, value: NDArray[np.float64], clamps: Counter[str] | None
) -> NDArray[np.float64]:
    """Keep h outputs inside [H_CLAMP, 1 - H_CLAMP]; clamped outputs are counted per family."""
    value = np.asarray(value, dtype=float)
    bad = ~np.isfinite(value) | (value < H_CLAMP) | (value > 1.0 - H_CLAMP)
    if np.any(bad):
        if clamps is not None:
            clamps[c.family] += int(np.count_nonzero(bad))
        value = np.where(np.isnan(value), 0.5, value)
        value = np.clip(value, H_CLAMP, 1.0 - H_CLAMP)
    return value


def h_function(
    c: PairCopula, u: ArrayLike, given_v: ArrayLike, clamps: Counter[str] | None = None
) -> float | NDArray[np.float64]:
    """Conditional distribution P(U <= u | V = given_v) = dC(u, v)/dv."""
    ua = _open_unit("u", u)
    va = _open_unit("given_v", given_v)
    f, t = c.family, c.theta
    if c.rotation == 0:
        value = _base_h(f, t, ua, va)
    elif c.rotation == 90:
        value = 1.0 - _base_h(f, t, 1.0 - ua, va)
    elif c.rotation == 180:
        value = 1.0 - _base_h(f, t, 1.0 - ua, 1.0 - va)
    else:
        value = _base_h(f, t, ua, 1.0 - va)
    return _out(_clamp_h(c, value, clamps))


def inverse_h(
    c: PairCopula, p: ArrayLike, given_v: ArrayLike, clamps: Counter[str] | None = None
) -> float | NDArray[np.float64]:
    """u such that h_function(c, u, given_v) = p."""
    pa = _open_unit("p", p)
    va = _open_unit("given_v", given_v)
    f, t = c.family, c.theta
    if c.rotation == 0:
        value = _base_h_inverse(f, t, pa, va)
    elif c.rotation == 90:
        value = 1.0 - _base_h_inverse(f, t, 1.0 - pa, va)
    elif c.rotation == 180:
        value = 1.0 - _base_h_inverse(f, t, 1.0 - pa, 1.0 - va)
    else:
        value = _base_h_inverse(f, t, pa, 1.0 - va)
    return _out(_clamp_h(c, value, clamps))


# =============================================================================
# Fitting
# =============================================================================


@dataclass(frozen=True)
class PairFit:
    """Outcome of a pair-copula selection: the winner plus the AIC table."""

    copula: PairCopula
    loglik: float
    aic: float
    aic_table: dict[str, float]
    diagnostics: tuple[str, ...] = ()


def _family_bounds(family: str) -> tuple[float, float]:
    if family == "gaussian":
        return -GAUSSIAN_RHO_MAX, GAUSSIAN_RHO_MAX
    if family == "clayton":
        return 1e-4, CLAYTON_THETA_MAX
    if family == "gumbel":
        return 1.0, GUMBEL_THETA_MAX
    return -FRANK_THETA_MAX, FRANK_THETA_MAX


def _candidates(tau: float) -> list[tuple[str, int]]:
    """Families and rotations compatible with the sign of the empirical tau."""
    positive = tau >= 0.0
    rotations = (0, 180) if positive else (90, 270)
    candidates: list[tuple[str, int]] = [("gaussian", 0), ("frank", 0)]
    for family in ROTATED_FAMILIES:
        candidates.extend((family, r) for r in rotations)
    return candidates


def _loglik(family: str, theta: float, rotation: int, u, v) -> float:
    if family == "frank" and abs(theta) < 1e-8:
        return 0.0
    copula = PairCopula(family, theta, rotation)  # type: ignore[arg-type]
    return float(np.sum(pair_copula_logpdf(copula, u, v)))


def fit_pair_copula(
    u: ArrayLike,
    v: ArrayLike,
    independence_level: float | None = None,
) -> PairFit:
    """
    Select a pair copula by maximum likelihood and AIC.

    Each candidate family's parameter is estimated by bounded one-dimensional
    optimisation; the family with minimum AIC = 2k - 2 loglik wins (independence
    has k = 0 and loglik 0), so independence is chosen only when it wins on AIC.
    ``independence_level`` opts into a Kendall independence pre-test: when set,
    independence is selected outright if the test does not reject at that level.

    Raises:
        ShapeError: lengths differ or fewer than MIN_PAIR_OBSERVATIONS pairs
    """
    ua = _open_unit("u", u)
    va = _open_unit("v", v)
    if ua.shape != va.shape or ua.ndim != 1:
        raise ShapeError("fit_pair_copula needs two equal-length 1-D sequences")
    if ua.size < MIN_PAIR_OBSERVATIONS:
        raise ShapeError(f"fit_pair_copula needs >= {MIN_PAIR_OBSERVATIONS} observations")

    tau_result = stats.kendalltau(ua, va)
    tau, p_value = float(tau_result[0]), float(tau_result[1])
    if not np.isfinite(tau):
        tau, p_value = 0.0, 1.0

    independence = PairCopula()
    aic_table: dict[str, float] = {"independence": 0.0}
    diagnostics: list[str] = []

    if independence_level is not None and p_value > independence_level:
        return PairFit(independence, 0.0, 0.0, aic_table, ())

    best = PairFit(independence, 0.0, 0.0, aic_table)
    for family, rotation in _candidates(tau):
        key = f"{family}" if rotation == 0 else f"{family}_{rotation}"
        lo, hi = _family_bounds(family)
        try:
            result = optimize.minimize_scalar(
                lambda th, f=family, r=rotation: -_loglik(f, th, r, ua, va),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-6},
            )
        except (ValueError, FloatingPointError, DomainError) as e:
            diagnostics.append(f"{key}: optimiser failed ({e})")
            continue

        theta = float(result.x)
        loglik = -float(result.fun)
        if not result.success or not np.isfinite(loglik):
            diagnostics.append(f"{key}: optimiser did not converge, family excluded")
            continue
        if family == "frank" and abs(theta) < 1e-8:
            diagnostics.append("frank: estimate collapsed to independence")
            continue
        if abs(theta - lo) < 1e-5 or abs(theta - hi) < 1e-5:
            diagnostics.append(f"{key}: theta at bound {theta:.4g}")

        aic = 2.0 - 2.0 * loglik
        aic_table[key] = aic
        if aic < best.aic:
            copula = PairCopula(family, theta, rotation)  # type: ignore[arg-type]
            best = PairFit(copula, loglik, aic, aic_table)

    for message in diagnostics:
        logger.debug(f"⚠️ {message}")
    return PairFit(best.copula, best.loglik, best.aic, aic_table, tuple(diagnostics))
