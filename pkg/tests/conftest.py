"""Shared fixtures: synthetic Pima-style data, a small HIV cohort and run configs."""

import json

import pytest

from data.models.dataset import MixedDataset, categorical, continuous
from data.sources import (
    make_hiv_baseline,
    make_hiv_histories,
    make_pima_like,
    make_treatment_catalog,
)
from execution import calibrate_execution_models
from scenario import TreatmentCatalog


@pytest.fixture(scope="session")
def pima() -> MixedDataset:
    return make_pima_like(n=392, seed=11)


@pytest.fixture(scope="session")
def small_mixed() -> MixedDataset:
    """Two categoricals and two continuous columns, 300 rows."""
    return make_pima_like(n=300, seed=3).select(["Pregnant", "BMI", "Glucose", "Age"])


@pytest.fixture(scope="session")
def catalog_entries():
    return make_treatment_catalog(n_treatments=6, seed=5)


@pytest.fixture(scope="session")
def treatment_ids(catalog_entries) -> list[str]:
    return [e["treatment_id"] for e in catalog_entries]


@pytest.fixture(scope="session")
def histories(treatment_ids):
    return make_hiv_histories(600, 8, treatment_ids, seed=9)


@pytest.fixture(scope="session")
def execution_models(histories, treatment_ids):
    return calibrate_execution_models(histories, treatment_ids)


@pytest.fixture(scope="session")
def catalog(catalog_entries, execution_models) -> TreatmentCatalog:
    entries = {e["treatment_id"]: e for e in catalog_entries}
    return TreatmentCatalog(entries).with_switch_model(execution_models.switch)


@pytest.fixture(scope="session")
def hiv_baseline(treatment_ids) -> MixedDataset:
    return make_hiv_baseline(200, treatment_ids, seed=21)


@pytest.fixture
def yes_no_schema():
    return [categorical("Smoker", ["No", "Yes"]), continuous("Weight")]


@pytest.fixture
def write_config(tmp_path):
    """Write a run config into tmp_path and return its path."""

    def _write(document: dict, name: str = "config.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)

    return _write
