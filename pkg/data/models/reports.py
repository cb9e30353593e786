"""
Report models of the analysis layer: fidelity of generated cohorts and the
replicated association-test experiment.
"""

from typing import Literal, TypedDict

TestKind = Literal["chi2", "student", "welch"]


class ColumnFidelity(TypedDict):
    """Marginal distance of one column between original and simulated data."""

    kind: Literal["continuous", "categorical"]
    metric: Literal["ks", "tv"]
    value: float


class PairFidelity(TypedDict):
    """Kendall tau of one column pair in both datasets."""

    first: str
    second: str
    tau_original: float
    tau_simulated: float
    delta: float


class FidelitySummary(TypedDict):
    n_original: int
    n_simulated: int
    median_ks: float | None
    max_ks: float | None
    max_tv: float | None
    max_delta_tau: float | None
    marginals_ok: bool  # every KS and TV below the threshold
    dependence_ok: bool  # every |delta tau| below the threshold


class FidelityReport(TypedDict):
    columns: dict[str, ColumnFidelity]
    pairs: list[PairFidelity]
    summary: FidelitySummary
    threshold: float


class PValueExperiment(TypedDict, total=False):
    """P-values of every covariate over replicated simulated datasets."""

    generator: str
    noise_enabled: bool
    outcome: str
    n_datasets: int
    n_rows: int
    tests: dict[str, TestKind]
    pvalues: dict[str, list[float]]
    original_pvalues: dict[str, float]
    diagnostics: list[str]


class PValueStudy(TypedDict):
    """Experiments over generator families, with and without outcome noise."""

    experiments: list[PValueExperiment]
    seed: int
    rng: str
