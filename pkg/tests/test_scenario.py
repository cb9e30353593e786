import numpy as np
import pytest

from config.settings import CONSTANT_CHAINS, PENETRATION_RATES
from data.models.scenario import (
    ARN_LEVELS,
    CREA_LEVELS,
    PatientState,
    TreatmentEntry,
    create_default_scenario_config,
    validate_scenario_config,
)
from execution.effects import ExecutionModels, StateTransitionModel
from execution.markov import ConstantMarkovModel
from scenario.catalog import TreatmentCatalog, catalog_from_dict, catalog_to_dict
from scenario.engine import check_rule4, run_simulation, run_sweep, sweep_points
from scenario.intervals import summarize_runs
from scenario.steps import (
    Cohort,
    add_incident_cases,
    step1_update_covariates,
    step2_update_treatment,
    step3_update_cohort,
    step4_period_costs,
    update_treatments,
)
from utils.errors import ConfigError, DataError, DomainError

ENTRIES = {
    "T01": TreatmentEntry(
        treatment_id="T01", MEDCOSTB=100.0, AMMT=2005.0, AMMGM=2018.0, has_generic=True
    ),
    "T02": TreatmentEntry(treatment_id="T02", MEDCOSTB=60.0, AMMT=2012.0, has_generic=False),
}


def _patient(**changes) -> PatientState:
    state = PatientState(SEX=1, BC=0, CONTA=0, AGE=540.0, VIHD=120.0, TREATD=24.0)
    state.update(VIHS=0, HEART=0, DIAB=0, DEATH=1, ARN=0, CREA=1, IR=1)
    state.update(treatment_id="T01", on_generic=False)
    state.update(changes)  # type: ignore[typeddict-item]
    return state


def _constant_transitions(name, states, rows) -> StateTransitionModel:
    return StateTransitionModel(name, tuple(states), dict(zip(states, rows, strict=True)))


def _identity_models(crea_rows=None) -> ExecutionModels:
    chains = {name: ConstantMarkovModel.identity(["0", "1"]) for name in CONSTANT_CHAINS}
    arn = _constant_transitions("ARN", ARN_LEVELS, np.eye(3))
    crea = _constant_transitions(
        "CREA", CREA_LEVELS, crea_rows if crea_rows is not None else np.eye(3)
    )
    return ExecutionModels(chains, arn, crea)


# =============================================================================
# Configuration and catalog
# =============================================================================


def test_scenario_defaults():
    cfg = validate_scenario_config({})
    assert cfg["PENRATE"] == 0.4
    assert cfg["horizon"] == 10
    assert cfg["incident_cases_per_step"] == 455
    assert cfg["population_fraction"] == 0.228


@pytest.mark.parametrize(
    "changes,field",
    [
        ({"PENRATE": 1.5}, "PENRATE"),
        ({"n_runs": 0}, "n_runs"),
        ({"generic_price_fraction": 0.0}, "generic_price_fraction"),
        ({"branded_drop_at_generic": 1.0}, "branded_drop_at_generic"),
        ({"record_trajectories": "yes"}, "record_trajectories"),
        ({"colour": "blue"}, "scenario"),
    ],
)
def test_invalid_scenario_values_name_the_field(changes, field):
    with pytest.raises(ConfigError) as error:
        validate_scenario_config(changes)
    assert error.value.field == field


def test_catalog_validation():
    with pytest.raises(ConfigError):
        TreatmentCatalog({})
    with pytest.raises(ConfigError):
        TreatmentCatalog({"T9": TreatmentEntry(treatment_id="T9", MEDCOSTB=0.0, AMMT=2000.0)})
    catalog = TreatmentCatalog(ENTRIES)
    with pytest.raises(DataError):
        catalog.entry("T77")
    with pytest.raises(DataError):
        catalog.require(["T01", "T77"])


def test_catalog_document_keeps_switch_model(catalog):
    reloaded = catalog_from_dict(catalog_to_dict(catalog))
    assert reloaded.ids == catalog.ids
    assert reloaded.switch_model is not None
    assert set(reloaded.switch_model.constant_rows) == set(catalog.switch_model.constant_rows)


def test_switch_probabilities_without_model_keep_treatment():
    probs = TreatmentCatalog(ENTRIES).switch_probs(np.array(["T02", "T01"]), {})
    np.testing.assert_array_equal(probs, [[0.0, 1.0], [1.0, 0.0]])


def test_treatment_unknown_to_switch_model_is_kept():
    switch = ConstantMarkovModel(("T01",), np.array([[1.0]]))
    catalog = TreatmentCatalog(ENTRIES).with_switch_model(switch)
    probs = catalog.switch_probs(np.array(["T02"]), {})
    np.testing.assert_array_equal(probs, [[0.0, 1.0]])


# =============================================================================
# Period steps
# =============================================================================


def test_identity_models_only_age_durations():
    state = step1_update_covariates(_patient(), _identity_models(), seed=0)
    assert state["AGE"] == 546.0
    assert state["VIHD"] == 126.0
    assert state["TREATD"] == 30.0
    for name in ("ARN", "CREA", "IR", "HEART", "DIAB", "VIHS", "DEATH"):
        assert state[name] == _patient()[name]


def test_crea_three_sets_ir_to_zero():
    to_three = np.tile([0.0, 0.0, 1.0], (3, 1))
    state = step1_update_covariates(_patient(), _identity_models(to_three), seed=0)
    assert state["CREA"] == 3
    assert state["IR"] == 0
    inverted = step1_update_covariates(
        _patient(), _identity_models(to_three), seed=0, invert_ir_rule=True
    )
    assert inverted["IR"] == 1


def test_dead_patient_is_frozen():
    dead = _patient(DEATH=0)
    assert step1_update_covariates(dead, _identity_models(), seed=0) == dead


def test_missing_execution_model_is_a_config_error():
    models = _identity_models()
    incomplete = ExecutionModels(models.chains, None, models.crea)
    with pytest.raises(ConfigError):
        step1_update_covariates(_patient(), incomplete, seed=0)


def test_no_conversion_and_no_switch_changes_nothing():
    cfg = create_default_scenario_config(penrate=0.0)
    state = step2_update_treatment(_patient(), TreatmentCatalog(ENTRIES), cfg, 2020.0, seed=1)
    assert state["treatment_id"] == "T01"
    assert not state["on_generic"]


def test_generic_patient_stays_generic():
    cfg = create_default_scenario_config(penrate=0.4)
    catalog = TreatmentCatalog(ENTRIES)
    state = step2_update_treatment(_patient(on_generic=True), catalog, cfg, 2020.0, seed=2)
    assert state["on_generic"]


def test_conversion_frequency_matches_probability():
    cfg = create_default_scenario_config(penrate=0.25)
    cohort = Cohort.from_states([_patient()] * 10_000)
    rng = np.random.default_rng(3)
    out = update_treatments(
        cohort, TreatmentCatalog(ENTRIES), cfg, 2019.0, rng.random(10_000), rng.random(10_000)
    )
    assert abs(out.on_generic.mean() - 0.25) < 0.02
    assert np.array_equal(out.ever_generic, out.on_generic)


def test_unknown_treatment_is_a_data_error():
    cfg = create_default_scenario_config()
    with pytest.raises(DataError):
        step2_update_treatment(
            _patient(treatment_id="T77"), TreatmentCatalog(ENTRIES), cfg, 2020.0, 0
        )


@pytest.mark.parametrize("count", [0, 455])
def test_incident_cases_grow_the_cohort(count):
    cfg = create_default_scenario_config()
    cfg["incident_cases_per_step"] = count
    cohort = [_patient(), _patient(treatment_id="T02")]
    grown = step3_update_cohort(cohort, [_patient()], {"T01": 0.5, "T02": 0.5}, cfg, seed=4)
    assert len(grown) == 2 + count
    assert all(p["DEATH"] == 1 and not p["on_generic"] for p in grown[2:])
    assert {p["treatment_id"] for p in grown[2:]} <= {"T01", "T02"}


@pytest.mark.parametrize("shares", [{}, {"T01": 0.0, "T02": 0.0}, {"T01": float("nan")}])
def test_incident_cases_need_positive_treatment_shares(shares):
    cfg = create_default_scenario_config()
    cfg["incident_cases_per_step"] = 5
    with pytest.raises(DomainError, match="positive mass"):
        step3_update_cohort([_patient()], [_patient()], shares, cfg, seed=4)

    cfg["incident_cases_per_step"] = 0
    assert len(step3_update_cohort([_patient()], [_patient()], shares, cfg, seed=4)) == 1


def test_incident_cases_into_an_empty_cohort_are_rejected():
    pool = Cohort.from_states([_patient()])
    empty = pool.take(np.array([], dtype=np.int64))
    with pytest.raises(DomainError, match="current treatment"):
        add_incident_cases(empty, pool, 3, np.random.default_rng(0))
    assert add_incident_cases(empty, pool, 0, np.random.default_rng(0)).size == 0


def test_never_converting_patient_costs_the_same():
    cfg = create_default_scenario_config(penrate=0.0)
    cost_b, cost_g = step4_period_costs(_patient(), TreatmentCatalog(ENTRIES), cfg, 2020.0)
    assert cost_b == cost_g == 100.0


def test_generic_patient_saving():
    cfg = create_default_scenario_config(penrate=0.4)
    cfg["counterfactual_branded_drop"] = True
    cost_b, cost_g = step4_period_costs(
        _patient(on_generic=True), TreatmentCatalog(ENTRIES), cfg, 2018.0
    )
    assert cost_b == pytest.approx(80.0)
    assert cost_g == pytest.approx(40.0)


def test_dead_patient_costs_nothing():
    cfg = create_default_scenario_config()
    assert step4_period_costs(_patient(DEATH=0), TreatmentCatalog(ENTRIES), cfg, 2020.0) == (
        0.0,
        0.0,
    )


# =============================================================================
# Engine
# =============================================================================


def _small_scenario(**changes):
    cfg = {"n_runs": 3, "incident_cases_per_step": 10, **changes}
    return validate_scenario_config(cfg)


def test_one_result_per_run(hiv_baseline, catalog, execution_models):
    results = run_simulation(hiv_baseline, catalog, execution_models, _small_scenario(), 7)
    assert len(results) == 3
    for result in results:
        assert result.n_patients == 200 + 9 * 10
        assert result.generic_uptake_by_period.shape == (10,)
        assert np.all(result.fd <= 10)
        assert result.total_dc_scaled == pytest.approx(result.dc.sum() / 0.228)


def test_zero_penetration_saves_nothing(hiv_baseline, catalog, execution_models):
    cfg = _small_scenario(PENRATE=0.0)
    for result in run_simulation(hiv_baseline, catalog, execution_models, cfg, 7):
        assert np.all(result.dc == 0.0)
        assert not result.ever_generic.any()


def test_runs_do_not_depend_on_threads(hiv_baseline, catalog, execution_models):
    cfg = _small_scenario()
    serial = run_simulation(hiv_baseline, catalog, execution_models, cfg, 11, threads=1)
    pooled = run_simulation(hiv_baseline, catalog, execution_models, cfg, 11, threads=3)
    for a, b in zip(serial, pooled, strict=True):
        np.testing.assert_array_equal(a.dc, b.dc)
        np.testing.assert_array_equal(a.fd, b.fd)


def test_scenarios_share_everything_but_conversion(hiv_baseline, catalog, execution_models):
    low = run_simulation(
        hiv_baseline, catalog, execution_models, _small_scenario(PENRATE=0.1), 5
    )
    high = run_simulation(
        hiv_baseline, catalog, execution_models, _small_scenario(PENRATE=0.7), 5
    )
    for a, b in zip(low, high, strict=True):
        np.testing.assert_array_equal(a.fd, b.fd)
        assert b.ever_generic.sum() >= a.ever_generic.sum()


def test_generic_is_never_left_without_a_switch(hiv_baseline, catalog, execution_models):
    cfg = _small_scenario(PENRATE=0.7, record_trajectories=True, n_runs=1)
    (result,) = run_simulation(hiv_baseline, catalog, execution_models, cfg, 3)
    assert result.trajectories
    assert check_rule4(result.trajectories) == []


def test_engine_input_errors(hiv_baseline, catalog, execution_models):
    incomplete = ExecutionModels(execution_models.chains, execution_models.arn, None)
    with pytest.raises(ConfigError):
        run_simulation(hiv_baseline, catalog, incomplete, _small_scenario(), 1)
    narrow = TreatmentCatalog({"T01": catalog.entry("T01")})
    with pytest.raises(DataError):
        run_simulation(hiv_baseline, narrow, execution_models, _small_scenario(), 1)
    with pytest.raises(ConfigError):
        run_simulation(hiv_baseline, catalog, execution_models, {"PENRATE": -0.1}, 1)


def test_sweep_labels_and_runs(hiv_baseline, catalog, execution_models):
    points = sweep_points(_small_scenario(n_runs=1))
    assert [label for label, _ in points] == [f"penrate_{p:.2f}" for p in PENETRATION_RATES]
    grid = sweep_points(_small_scenario(), [0.4], ammgm_offsets=[12, 14])
    assert [label for label, _ in grid] == ["penrate_0.40_ammgm_12", "penrate_0.40_ammgm_14"]
    results = run_sweep(hiv_baseline, catalog, execution_models, points[:2], 9)
    assert list(results) == ["penrate_0.10", "penrate_0.25"]


def test_run_summary_keys(hiv_baseline, catalog, execution_models):
    results = run_simulation(hiv_baseline, catalog, execution_models, _small_scenario(), 2)
    summary = summarize_runs(results)
    assert summary["n_runs"] == 3
    assert summary["total_dc"]["pi90"] is None
    assert len(summary["generic_uptake_by_period"]) == 10
    assert set(results[0].summary()) >= {"total_dc", "total_dc_scaled", "mean_ndc"}


@pytest.mark.slow
def test_savings_grow_with_penetration(hiv_baseline, catalog, execution_models):
    medians = []
    for _, cfg in sweep_points(_small_scenario(n_runs=30, incident_cases_per_step=455)):
        results = run_simulation(hiv_baseline, catalog, execution_models, cfg, 2024, threads=4)
        medians.append(summarize_runs(results)["total_dc_scaled"]["median"])
    assert all(b >= a for a, b in zip(medians, medians[1:], strict=False))
    assert medians[-1] > medians[0]
