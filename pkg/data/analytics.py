"""
Validation analytics for generated cohorts and simulated outcomes.

This module compares simulated data with the source data and replicates the
association tests of the source data on generated datasets. It performs no
file handling; the pipeline writes the reports.

- fidelity: marginal distances (KS, total variation) and Kendall tau deltas
- association tests: Pearson chi-square or two-sample Student t
- p-value experiment: replicated datasets from a generator plus an outcome
  generator, with and without outcome noise
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any

import numpy as np
import pandas as pd
from scipy import stats

from config.settings import (
    DEFAULT_N_DATASETS,
    DEFAULT_N_ROWS,
    DEFAULT_THREADS,
    EXPECTED_COUNT_WARNING,
    RNG_NAME,
)
from core.stats import kendall_tau
from data.models.dataset import MixedDataset, categorical
from data.models.reports import (
    ColumnFidelity,
    FidelityReport,
    FidelitySummary,
    PairFidelity,
    PValueExperiment,
    PValueStudy,
    TestKind,
)
from execution.outcomes import OutcomeGenerator, simulate_outcomes
from generators import GeneratorModel, fit_generator, sample_generator
from utils.errors import DataError, DomainError, UndefinedCorrelationError
from utils.seeding import split_seed

logger = logging.getLogger(__name__)

# =============================================================================
# Fidelity
# =============================================================================


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return float(0.5 * np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def _frequencies(data: MixedDataset, name: str) -> np.ndarray:
    col = data.column_schema(name)
    counts = data.frame[name].value_counts().reindex(col.categories, fill_value=0)
    return counts.to_numpy(dtype=float) / max(data.n, 1)


def _tau_or_zero(x: np.ndarray, y: np.ndarray) -> float:
    try:
        return kendall_tau(x, y)
    except UndefinedCorrelationError:
        return 0.0


def fidelity(
    original: MixedDataset, simulated: MixedDataset, threshold: float = 0.1
) -> FidelityReport:
    """
    Compare a simulated dataset with the original one.

    Continuous columns use the two-sample KS statistic, categorical columns the
    total-variation distance of category frequencies; every column pair gets
    the absolute difference of Kendall taus (0 for a constant column).

    Raises:
        DataError: schemas differ or a dataset is empty
    """
    if original.schema != simulated.schema:
        raise DataError("Original and simulated datasets have different schemas")
    if original.n < 2 or simulated.n < 2:
        raise DataError("Fidelity needs at least 2 rows in each dataset")

    columns: dict[str, ColumnFidelity] = {}
    for col in original.schema:
        if col.is_categorical:
            value = total_variation(
                _frequencies(original, col.name), _frequencies(simulated, col.name)
            )
            columns[col.name] = ColumnFidelity(kind="categorical", metric="tv", value=value)
        else:
            result = stats.ks_2samp(original.values(col.name), simulated.values(col.name))
            columns[col.name] = ColumnFidelity(
                kind="continuous", metric="ks", value=float(result.statistic)
            )

    pairs: list[PairFidelity] = []
    for first, second in combinations(original.names, 2):
        tau_o = _tau_or_zero(original.values(first), original.values(second))
        tau_s = _tau_or_zero(simulated.values(first), simulated.values(second))
        pairs.append(
            PairFidelity(
                first=first,
                second=second,
                tau_original=tau_o,
                tau_simulated=tau_s,
                delta=abs(tau_o - tau_s),
            )
        )

    ks = [c["value"] for c in columns.values() if c["metric"] == "ks"]
    tv = [c["value"] for c in columns.values() if c["metric"] == "tv"]
    deltas = [p["delta"] for p in pairs]
    summary = FidelitySummary(
        n_original=original.n,
        n_simulated=simulated.n,
        median_ks=float(np.median(ks)) if ks else None,
        max_ks=max(ks) if ks else None,
        max_tv=max(tv) if tv else None,
        max_delta_tau=max(deltas) if deltas else None,
        marginals_ok=all(v < threshold for v in ks + tv),
        dependence_ok=all(d < threshold for d in deltas),
    )
    logger.info(
        f"📋 Fidelity: median KS {summary['median_ks']}, "
        f"max |delta tau| {summary['max_delta_tau']}"
    )
    return FidelityReport(columns=columns, pairs=pairs, summary=summary, threshold=threshold)


# =============================================================================
# Association tests
# =============================================================================


@dataclass(frozen=True)
class AssociationTest:
    pvalue: float
    kind: TestKind
    statistic: float
    diagnostics: tuple[str, ...] = field(default=())


def _binary_outcome(data: MixedDataset, outcome: str) -> np.ndarray:
    col = data.column_schema(outcome)
    if not col.is_categorical or len(col.categories) != 2:
        raise DomainError(f"Outcome '{outcome}' must be a binary categorical column")
    return data.labels(outcome) == col.categories[1]


def association_test(
    data: MixedDataset, covariate: str, outcome: str, welch: bool = False
) -> AssociationTest:
    """
    Test the association between a covariate and a binary outcome.

    Categorical covariates get a Pearson chi-square test without continuity
    correction; continuous covariates a two-sample t-test, pooled variance
    unless ``welch``. A test with an empty outcome group or a single observed
    covariate level returns p = 1 with a diagnostic.

    Raises:
        DomainError: non-binary outcome or zero-variance continuous covariate
    """
    positive = _binary_outcome(data, outcome)
    col = data.column_schema(covariate)

    if col.is_categorical:
        table = pd.crosstab(data.labels(covariate), positive).to_numpy(dtype=float)
        table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
        if table.shape[0] < 2 or table.shape[1] < 2:
            message = f"{covariate}: contingency table degenerate, p set to 1"
            return AssociationTest(1.0, "chi2", 0.0, (message,))
        statistic, pvalue, _, expected = stats.chi2_contingency(table, correction=False)
        diagnostics: tuple[str, ...] = ()
        if np.min(expected) < EXPECTED_COUNT_WARNING:
            message = f"{covariate}: expected count below {EXPECTED_COUNT_WARNING}"
            logger.warning(f"⚠️ {message}")
            diagnostics = (message,)
        return AssociationTest(float(pvalue), "chi2", float(statistic), diagnostics)

    values = data.values(covariate)
    kind: TestKind = "welch" if welch else "student"
    if np.all(values == values[0]):
        raise DomainError(f"Covariate '{covariate}' has zero variance; the t-test is undefined")
    a, b = values[positive], values[~positive]
    if a.size < 2 or b.size < 2:
        message = f"{covariate}: outcome group too small, p set to 1"
        return AssociationTest(1.0, kind, 0.0, (message,))
    result = stats.ttest_ind(a, b, equal_var=not welch)
    if not np.isfinite(result.pvalue):
        return AssociationTest(1.0, kind, 0.0, (f"{covariate}: groups constant, p set to 1",))
    return AssociationTest(float(result.pvalue), kind, float(result.statistic))


def association_pvalue(
    data: MixedDataset, covariate: str, outcome: str, welch: bool = False
) -> float:
    """P-value of ``association_test``."""
    return association_test(data, covariate, outcome, welch).pvalue


# =============================================================================
# P-value replication experiment
# =============================================================================


def _replicate(
    generator: GeneratorModel,
    outcome_gen: OutcomeGenerator,
    covariates: list[str],
    n_rows: int,
    replicate_seed: int,
    welch: bool,
) -> tuple[dict[str, AssociationTest], list[str]]:
    sample = sample_generator(generator, n_rows, split_seed(replicate_seed, "generate"))
    labels, diagnostics = simulate_outcomes(
        outcome_gen, sample, split_seed(replicate_seed, "outcome")
    )
    outcome = outcome_gen.classifier.outcome
    data = sample.with_columns(
        [categorical(outcome, list(outcome_gen.classifier.labels))], {outcome: labels}
    )
    tests = {name: association_test(data, name, outcome, welch) for name in covariates}
    return tests, diagnostics


def pvalue_experiment(
    generator: GeneratorModel,
    outcome_gen: OutcomeGenerator,
    n_datasets: int = DEFAULT_N_DATASETS,
    n_rows: int = DEFAULT_N_ROWS,
    seed: int = 0,
    original: MixedDataset | None = None,
    covariates: list[str] | None = None,
    generator_name: str = "",
    welch: bool = False,
    threads: int = DEFAULT_THREADS,
) -> PValueExperiment:
    """
    Replicate the association tests on ``n_datasets`` simulated datasets.

    Replicate k draws its cohort and its outcomes from seeds split from
    ``seed`` under ``replicate-k``, so experiments that share the seed share
    their cohorts.
    """
    if n_datasets < 1 or n_rows < 2:
        raise DomainError("pvalue_experiment needs n_datasets >= 1 and n_rows >= 2")
    outcome = outcome_gen.classifier.outcome
    names = (
        covariates
        if covariates is not None
        else [col.name for col in generator.schema if col.name != outcome]
    )
    seeds = [split_seed(seed, f"replicate-{k}") for k in range(n_datasets)]

    def one(replicate_seed: int):
        return _replicate(generator, outcome_gen, names, n_rows, replicate_seed, welch)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            replicates = list(pool.map(one, seeds))
    else:
        replicates = [one(s) for s in seeds]

    diagnostics: list[str] = []
    for tests, extra in replicates:
        diagnostics.extend(extra)
        diagnostics.extend(d for t in tests.values() for d in t.diagnostics)

    experiment = PValueExperiment(
        generator=generator_name,
        noise_enabled=outcome_gen.noise_enabled,
        outcome=outcome_gen.classifier.outcome,
        n_datasets=n_datasets,
        n_rows=n_rows,
        tests={name: replicates[0][0][name].kind for name in names},
        pvalues={name: [tests[name].pvalue for tests, _ in replicates] for name in names},
        diagnostics=sorted(set(diagnostics)),
    )
    if original is not None:
        experiment["original_pvalues"] = {
            name: association_pvalue(original, name, outcome, welch)
            for name in names
        }
    noise = "on" if outcome_gen.noise_enabled else "off"
    logger.info(f"✅ {generator_name or 'generator'} (noise {noise}): {n_datasets} replicates")
    return experiment


def run_pvalue_study(
    original: MixedDataset,
    outcome_gen: OutcomeGenerator,
    families: Sequence[str],
    n_datasets: int = DEFAULT_N_DATASETS,
    n_rows: int = DEFAULT_N_ROWS,
    seed: int = 0,
    noise_variants: Sequence[bool] = (True, False),
    welch: bool = False,
    threads: int = DEFAULT_THREADS,
) -> PValueStudy:
    """
    Experiments for every generator family, fitted on the original covariates,
    with outcome noise enabled and disabled.
    """
    outcome = outcome_gen.classifier.outcome
    covariates = original.select([n for n in original.names if n != outcome])
    experiments = []
    for family in families:
        generator = fit_generator(family, covariates, seed=split_seed(seed, f"fit-{family}"))
        for noise in noise_variants:
            experiments.append(
                pvalue_experiment(
                    generator,
                    outcome_gen.with_noise(noise),
                    n_datasets,
                    n_rows,
                    seed,
                    original=original,
                    covariates=covariates.names,
                    generator_name=family,
                    welch=welch,
                    threads=threads,
                )
            )
    return PValueStudy(experiments=experiments, seed=seed, rng=RNG_NAME)


def pvalues_frame(study: PValueStudy) -> pd.DataFrame:
    """Long table (generator, noise, covariate, test, replicate, pvalue)."""
    rows: list[dict[str, Any]] = []
    for experiment in study["experiments"]:
        for name, values in experiment["pvalues"].items():
            for replicate, p in enumerate(values):
                rows.append(
                    {
                        "generator": experiment["generator"],
                        "noise": experiment["noise_enabled"],
                        "covariate": name,
                        "test": experiment["tests"][name],
                        "replicate": replicate,
                        "pvalue": p,
                    }
                )
    columns = ["generator", "noise", "covariate", "test", "replicate", "pvalue"]
    return pd.DataFrame(rows, columns=columns)


def pvalue_summary(experiment: PValueExperiment, alpha: float = 0.05) -> dict[str, Any]:
    """Per covariate: median p, share below ``alpha`` and KS distance to uniform."""
    summary = {}
    for name, values in experiment["pvalues"].items():
        p = np.asarray(values, dtype=float)
        summary[name] = {
            "median": float(np.median(p)),
            "below_alpha": float(np.mean(p < alpha)),
            "ks_uniform": float(stats.kstest(p, "uniform").statistic),
            "original": experiment.get("original_pvalues", {}).get(name),
        }
    return summary
