import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from core.stats import mvn_sample, pseudo_observations, std_normal_cdf, std_normal_quantile
from generators.copulas import (
    PairCopula,
    fit_pair_copula,
    h_function,
    inverse_h,
    pair_copula_cdf,
    pair_copula_pdf,
)
from utils.errors import DomainError, ShapeError

COPULA_GRID = [
    PairCopula("gaussian", 0.5),
    PairCopula("gaussian", -0.6),
    PairCopula("clayton", 2.0),
    PairCopula("clayton", 2.0, 90),
    PairCopula("clayton", 1.5, 180),
    PairCopula("gumbel", 2.0),
    PairCopula("gumbel", 1.8, 270),
    PairCopula("frank", 5.0),
    PairCopula("frank", -4.0),
]


def _pseudo(sample):
    return np.column_stack([pseudo_observations(sample[:, j]) for j in range(sample.shape[1])])


# =============================================================================
# Distribution functions
# =============================================================================


def test_independence_cdf_and_h():
    c = PairCopula()
    assert pair_copula_cdf(c, 0.3, 0.6) == pytest.approx(0.18)
    assert h_function(c, 0.3, 0.9) == pytest.approx(0.3)


def test_gaussian_rho_zero_matches_independence():
    c = PairCopula("gaussian", 0.0)
    u, v = np.meshgrid(np.linspace(0.05, 0.95, 7), np.linspace(0.05, 0.95, 7))
    assert np.max(np.abs(pair_copula_cdf(c, u, v) - u * v)) < 1e-10


def test_clayton_cdf_closed_form():
    assert pair_copula_cdf(PairCopula("clayton", 2.0), 0.5, 0.5) == pytest.approx(
        7.0**-0.5, abs=1e-12
    )


@pytest.mark.parametrize("copula", COPULA_GRID)
def test_cdf_boundaries(copula):
    assert pair_copula_cdf(copula, 0.37, 1.0) == pytest.approx(0.37)
    assert pair_copula_cdf(copula, 1.0, 0.81) == pytest.approx(0.81)
    values = pair_copula_cdf(copula, np.linspace(0.01, 0.99, 30), 0.4)
    assert np.all((values >= 0.0) & (values <= 1.0))


def test_gaussian_h_closed_form_and_limit():
    rho = 0.6
    u, v = 0.2, 0.7
    expected = std_normal_cdf(
        (std_normal_quantile(u) - rho * std_normal_quantile(v)) / math.sqrt(1 - rho**2)
    )
    assert h_function(PairCopula("gaussian", rho), u, v) == pytest.approx(expected, abs=1e-10)
    assert h_function(PairCopula("gaussian", 0.9999), 0.3, 0.3) == pytest.approx(0.5, abs=1e-2)


def test_gumbel_h_matches_finite_difference():
    c = PairCopula("gumbel", 1.5)
    eps = 1e-5
    numeric = (pair_copula_cdf(c, 0.3, 0.7 + eps) - pair_copula_cdf(c, 0.3, 0.7 - eps)) / (2 * eps)
    assert h_function(c, 0.3, 0.7) == pytest.approx(numeric, abs=1e-5)


@pytest.mark.parametrize("copula", COPULA_GRID)
def test_inverse_h_round_trip(copula):
    u, v = np.meshgrid(np.linspace(0.05, 0.95, 20), np.linspace(0.05, 0.95, 20))
    h = h_function(copula, u.ravel(), v.ravel())
    back = inverse_h(copula, h, v.ravel())
    assert np.max(np.abs(back - u.ravel())) < 1e-8
    assert np.all(np.diff(h_function(copula, np.linspace(0.01, 0.99, 50), 0.5)) >= -1e-12)


@pytest.mark.parametrize(
    ("copula", "tol"),
    [
        (PairCopula("gaussian", 0.3), 1e-3),
        (PairCopula("frank", 3.0), 1e-3),
        (PairCopula("clayton", 1.0), 5e-3),
        (PairCopula("gumbel", 1.5), 5e-3),
    ],
)
def test_pdf_integrates_to_one(copula, tol):
    grid = (np.arange(200) + 0.5) / 200
    u, v = np.meshgrid(grid, grid)
    density = pair_copula_pdf(copula, u, v)
    assert np.all(density >= 0)
    assert abs(density.mean() - 1.0) < tol


def test_domain_errors():
    with pytest.raises(DomainError):
        pair_copula_pdf(PairCopula(), 0.0, 0.5)
    with pytest.raises(DomainError):
        h_function(PairCopula(), 0.5, 1.0)
    with pytest.raises(DomainError):
        PairCopula("clayton", -1.0)
    with pytest.raises(DomainError):
        PairCopula("frank", 0.0)
    with pytest.raises(DomainError):
        PairCopula("gaussian", 0.5, 90)


def test_extreme_h_values_are_clamped_and_counted():
    clamps: Counter[str] = Counter()
    value = h_function(PairCopula("clayton", 40.0), 1e-3, 0.999, clamps)
    assert value >= 1e-12
    assert clamps["clayton"] >= 1


def test_clamp_counts_stay_with_their_caller():
    first: Counter[str] = Counter()
    second: Counter[str] = Counter()
    h_function(PairCopula("clayton", 40.0), 1e-3, 0.999, first)
    h_function(PairCopula("gaussian", 0.3), 0.4, 0.6, second)
    h_function(PairCopula("clayton", 40.0), 1e-3, 0.999)

    assert first["clayton"] >= 1
    assert not second


@pytest.mark.parametrize(
    "copula", [PairCopula("gaussian", 0.6), PairCopula("clayton", 3.0), PairCopula("frank", 6.0)]
)
def test_theoretical_tau(copula):
    expected = {"gaussian": 2 / math.pi * math.asin(0.6), "clayton": 0.6}.get(copula.family)
    if expected is not None:
        assert copula.kendall_tau() == pytest.approx(expected)
    else:
        assert 0.4 < copula.kendall_tau() < 0.6


# =============================================================================
# Fitting
# =============================================================================


def test_independent_data_often_selects_independence():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        u = _pseudo(rng.uniform(size=(500, 2)))
        fit = fit_pair_copula(u[:, 0], u[:, 1])
        assert fit.aic == min(fit.aic_table.values())
        wins += fit.copula.family == "independence"
    assert wins >= 8


def test_independence_pretest_is_opt_in():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        u = _pseudo(rng.uniform(size=(500, 2)))
        fit = fit_pair_copula(u[:, 0], u[:, 1], independence_level=0.05)
        wins += fit.copula.family == "independence"
    assert wins >= 16


def test_aic_decides_when_the_pretest_does_not_reject():
    disagreements = 0
    for seed in range(40):
        u = _pseudo(mvn_sample([0.0, 0.0], [[1.0, 0.08], [0.08, 1.0]], 500, seed))
        p_value = float(stats.kendalltau(u[:, 0], u[:, 1])[1])
        fit = fit_pair_copula(u[:, 0], u[:, 1])
        if p_value <= 0.05 or fit.copula.family == "independence":
            continue
        disagreements += 1
        assert fit.aic < 0.0
        assert fit.aic == min(fit.aic_table.values())
        pretested = fit_pair_copula(u[:, 0], u[:, 1], independence_level=0.05)
        assert pretested.copula.family == "independence"
    assert disagreements >= 1


def test_gaussian_data_recovers_rho():
    sample = mvn_sample([0.0, 0.0], [[1.0, 0.8], [0.8, 1.0]], 1000, 42)
    u = _pseudo(sample)
    fit = fit_pair_copula(u[:, 0], u[:, 1])
    assert fit.copula.family == "gaussian"
    assert 0.75 <= fit.copula.theta <= 0.85
    assert fit.aic == min(fit.aic_table.values())


def test_comonotone_data_caps_theta():
    x = np.arange(1.0, 201.0)
    u = pseudo_observations(x)
    fit = fit_pair_copula(u, u)
    assert fit.copula.family != "independence"
    assert fit.copula.kendall_tau() > 0.9


def test_fit_needs_enough_pairs():
    with pytest.raises(ShapeError):
        fit_pair_copula([0.2, 0.4, 0.6], [0.3, 0.5, 0.7])
