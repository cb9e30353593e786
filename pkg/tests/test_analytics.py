import numpy as np
import pandas as pd
import pytest
from scipy import stats

from data.analytics import (
    association_pvalue,
    association_test,
    fidelity,
    pvalue_experiment,
    pvalue_summary,
    pvalues_frame,
    run_pvalue_study,
)
from data.models.dataset import MixedDataset, categorical, continuous
from execution.outcomes import build_outcome_generator
from generators import fit_discrete, fit_generator
from utils.errors import DataError, DomainError

YES_NO = ["No", "Yes"]


def _two_by_two(a_yes: int, a_no: int, b_yes: int, b_no: int) -> MixedDataset:
    group = ["A"] * (a_yes + a_no) + ["B"] * (b_yes + b_no)
    outcome = ["Yes"] * a_yes + ["No"] * a_no + ["Yes"] * b_yes + ["No"] * b_no
    schema = [categorical("Group", ["A", "B"]), categorical("Outcome", YES_NO)]
    return MixedDataset(schema, pd.DataFrame({"Group": group, "Outcome": outcome}))


def _continuous_groups(yes: list[float], no: list[float]) -> MixedDataset:
    schema = [continuous("x"), categorical("Outcome", YES_NO)]
    frame = pd.DataFrame({"x": yes + no, "Outcome": ["Yes"] * len(yes) + ["No"] * len(no)})
    return MixedDataset(schema, frame)


@pytest.fixture(scope="module")
def outcome_gen(pima):
    return build_outcome_generator(pima, "Diabetes", seed=1)


# =============================================================================
# Fidelity
# =============================================================================


def test_self_comparison_has_zero_distances(pima):
    report = fidelity(pima, pima)
    assert all(c["value"] == 0.0 for c in report["columns"].values())
    assert all(p["delta"] == 0.0 for p in report["pairs"])
    assert len(report["pairs"]) == len(pima.names) * (len(pima.names) - 1) // 2
    assert report["summary"]["marginals_ok"] and report["summary"]["dependence_ok"]


def test_constant_column_is_far_from_spread_original(pima):
    frame = pima.frame.copy()
    frame["Glucose"] = pima.values("Glucose").min() - 1.0
    report = fidelity(pima, MixedDataset(pima.schema, frame))
    assert report["columns"]["Glucose"]["value"] == pytest.approx(1.0)
    assert not report["summary"]["marginals_ok"]
    pair = next(p for p in report["pairs"] if {p["first"], p["second"]} == {"Glucose", "Age"})
    assert pair["tau_simulated"] == 0.0


def test_fidelity_uses_total_variation_for_categories(pima):
    frame = pima.frame.copy()
    frame["Pregnant"] = "Yes"
    report = fidelity(pima, MixedDataset(pima.schema, frame))
    share_no = np.mean(pima.labels("Pregnant") == "No")
    assert report["columns"]["Pregnant"]["metric"] == "tv"
    assert report["columns"]["Pregnant"]["value"] == pytest.approx(share_no)


def test_fidelity_schema_mismatch(pima):
    with pytest.raises(DataError):
        fidelity(pima, pima.select(["Glucose", "Age"]))


# =============================================================================
# Association tests
# =============================================================================


def test_chi_square_matches_closed_form():
    result = association_test(_two_by_two(30, 10, 10, 30), "Group", "Outcome")
    assert result.kind == "chi2"
    assert result.statistic == pytest.approx(20.0)
    assert result.pvalue == pytest.approx(stats.chi2.sf(20.0, 1))


def test_identical_proportions_give_p_one():
    assert association_pvalue(_two_by_two(20, 20, 20, 20), "Group", "Outcome") == pytest.approx(
        1.0
    )


def test_identical_means_give_p_one():
    data = _continuous_groups([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    assert association_pvalue(data, "x", "Outcome") == pytest.approx(1.0)


def test_student_and_welch_tests():
    yes, no = [5.0, 6.0, 7.0, 8.0, 9.0], [1.0, 1.5, 2.0, 2.5, 3.0, 20.0]
    data = _continuous_groups(yes, no)
    student = association_test(data, "x", "Outcome")
    welch = association_test(data, "x", "Outcome", welch=True)
    assert student.kind == "student" and welch.kind == "welch"
    assert student.pvalue == pytest.approx(stats.ttest_ind(yes, no).pvalue)
    assert welch.pvalue == pytest.approx(stats.ttest_ind(yes, no, equal_var=False).pvalue)


def test_degenerate_table_gives_p_one():
    result = association_test(_two_by_two(10, 10, 0, 0), "Group", "Outcome")
    assert result.pvalue == 1.0
    assert result.diagnostics


def test_small_expected_counts_are_reported():
    result = association_test(_two_by_two(2, 1, 1, 2), "Group", "Outcome")
    assert any("expected count" in d for d in result.diagnostics)


def test_association_input_errors(pima):
    with pytest.raises(DomainError):
        association_test(_continuous_groups([2.0, 2.0], [2.0, 2.0]), "x", "Outcome")
    with pytest.raises(DomainError):
        association_test(pima, "Pregnant", "Glucose")


# =============================================================================
# P-value replication
# =============================================================================


def test_one_pvalue_per_replicate(pima, outcome_gen):
    covariates = pima.select([n for n in pima.names if n != "Diabetes"])
    model = fit_discrete(covariates)
    experiment = pvalue_experiment(
        model, outcome_gen, 100, 100, seed=3, original=pima, generator_name="discrete"
    )
    assert set(experiment["pvalues"]) == set(covariates.names)
    assert all(len(v) == 100 for v in experiment["pvalues"].values())
    assert all(0.0 <= p <= 1.0 for v in experiment["pvalues"].values() for p in v)
    assert experiment["tests"]["Pregnant"] == "chi2"
    assert experiment["tests"]["Glucose"] == "student"
    assert set(experiment["original_pvalues"]) == set(covariates.names)


def test_replicates_do_not_depend_on_threads(pima, outcome_gen):
    model = fit_discrete(pima.select(["Pregnant", "Glucose", "Age"]))
    serial = pvalue_experiment(model, outcome_gen, 6, 80, seed=4, threads=1)
    pooled = pvalue_experiment(model, outcome_gen, 6, 80, seed=4, threads=3)
    assert serial["pvalues"] == pooled["pvalues"]


def test_experiment_arguments_are_checked(pima, outcome_gen):
    model = fit_discrete(pima.select(["Glucose"]))
    with pytest.raises(DomainError):
        pvalue_experiment(model, outcome_gen, n_datasets=0)


def test_study_covers_families_and_noise(pima, outcome_gen):
    study = run_pvalue_study(
        pima, outcome_gen, ["discrete", "continuous"], n_datasets=5, n_rows=60, seed=8
    )
    variants = [(e["generator"], e["noise_enabled"]) for e in study["experiments"]]
    assert variants == [(f, noise) for f in ("discrete", "continuous") for noise in (True, False)]
    frame = pvalues_frame(study)
    assert len(frame) == 4 * 5 * (len(pima.names) - 1)
    assert list(frame.columns)[:3] == ["generator", "noise", "covariate"]
    summary = pvalue_summary(study["experiments"][0])
    assert set(summary["Glucose"]) == {"median", "below_alpha", "ks_uniform", "original"}


# =============================================================================
# Calibration of the replicated tests
# =============================================================================


def _outcome_frame(x: np.ndarray, z: np.ndarray, yes: np.ndarray) -> MixedDataset:
    schema = [continuous("x"), continuous("z"), categorical("Outcome", YES_NO)]
    frame = pd.DataFrame({"x": x, "z": z, "Outcome": np.where(yes, "Yes", "No")})
    return MixedDataset(schema, frame)


@pytest.mark.slow
def test_independent_outcome_gives_uniform_pvalues():
    rng = np.random.default_rng(21)
    source = _outcome_frame(
        rng.normal(size=1000), rng.normal(size=1000), rng.random(1000) < 0.35
    )
    model = fit_generator("continuous", source.select(["x", "z"]), seed=3)
    gen = build_outcome_generator(source, "Outcome", seed=3)
    experiment = pvalue_experiment(model, gen, 100, 300, seed=5, covariates=["x"])

    pvalues = experiment["pvalues"]["x"]
    assert len(pvalues) == 100
    assert stats.kstest(pvalues, "uniform").statistic < 0.15


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["continuous", "vine"])
def test_strongly_associated_covariate_is_detected(kind):
    rng = np.random.default_rng(22)
    x = rng.normal(size=800)
    z = rng.normal(size=800)
    source = _outcome_frame(x, z, x + 0.3 * rng.normal(size=800) > 0.0)
    model = fit_generator(kind, source.select(["x", "z"]), seed=4)
    gen = build_outcome_generator(source, "Outcome", seed=4)
    experiment = pvalue_experiment(model, gen, 30, 200, seed=6, generator_name=kind)

    assert experiment["tests"]["x"] == "student"
    assert np.median(experiment["pvalues"]["x"]) < 0.05
