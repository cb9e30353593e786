import math

import numpy as np
import pandas as pd
import pytest

from data.models.dataset import MixedDataset, categorical, continuous
from generators import fit_generator, sample_generator
from generators.continuous import (
    bracket,
    compute_critical_values,
    fit_continuous,
    sample_continuous,
)
from generators.discrete import fit_discrete, sample_discrete
from generators.serialization import load_model, model_from_dict, model_to_dict, save_model
from utils.errors import ConfigError, DataError, DomainError, ShapeError


def _split_dataset(n_no: int, n_yes: int, seed: int = 0) -> MixedDataset:
    """One yes/no column with fixed counts and a continuous column shifted by it."""
    rng = np.random.default_rng(seed)
    labels = ["No"] * n_no + ["Yes"] * n_yes
    weight = rng.normal(70.0, 8.0, n_no + n_yes) + 10.0 * (np.array(labels) == "Yes")
    height = rng.normal(170.0, 9.0, n_no + n_yes) + 0.5 * weight
    frame = pd.DataFrame({"Smoker": labels, "Weight": weight, "Height": height})
    schema = [categorical("Smoker", ["No", "Yes"]), continuous("Weight"), continuous("Height")]
    return MixedDataset(schema, frame)


# =============================================================================
# Discrete generator
# =============================================================================


def test_discrete_configuration_proportions():
    model = fit_discrete(_split_dataset(60, 40))
    assert model.config_table[("No",)].probability == pytest.approx(0.6)
    assert model.config_table[("Yes",)].probability == pytest.approx(0.4)

    sample = sample_discrete(model, 100_000, 1)
    share = np.mean(sample.labels("Smoker") == "No")
    assert abs(share - 0.6) < 0.01


def test_discrete_conditional_means_follow_configuration():
    data = _split_dataset(300, 300, seed=2)
    model = fit_discrete(data)
    sample = sample_discrete(model, 20_000, 3)
    smokers = sample.labels("Smoker") == "Yes"
    gap = sample.values("Weight")[smokers].mean() - sample.values("Weight")[~smokers].mean()
    assert gap == pytest.approx(10.0, abs=2.0)


def test_discrete_only_observed_configurations(small_mixed):
    model = fit_discrete(small_mixed)
    sample = sample_discrete(model, 2000, 4)
    observed = set(zip(small_mixed.labels("Pregnant"), small_mixed.labels("BMI"), strict=True))
    drawn = set(zip(sample.labels("Pregnant"), sample.labels("BMI"), strict=True))
    assert drawn <= observed
    assert sum(e.probability for e in model.config_table.values()) == pytest.approx(1.0)


def test_discrete_sparse_configuration_uses_pooled_covariance():
    data = _split_dataset(50, 2)
    model = fit_discrete(data)
    sparse = model.config_table[("Yes",)]
    assert sparse.pooled
    assert sparse.n_rows == 2
    assert any("pooled covariance" in d for d in model.diagnostics)
    assert not model.config_table[("No",)].pooled


def test_discrete_rejects_empty_dataset(yes_no_schema):
    empty = MixedDataset(yes_no_schema, pd.DataFrame({"Smoker": [], "Weight": []}))
    with pytest.raises(ShapeError):
        fit_discrete(empty)


def test_discrete_is_deterministic(small_mixed):
    model = fit_discrete(small_mixed)
    assert sample_discrete(model, 100, 8).equals(sample_discrete(model, 100, 8))


# =============================================================================
# Continuous generator
# =============================================================================


def test_critical_values_follow_cumulative_probabilities():
    values = compute_critical_values(0.0, 1.0, [0.8, 0.2])
    assert values[0] == -math.inf and values[-1] == math.inf
    assert values[1] == pytest.approx(0.8416, abs=1e-4)
    assert compute_critical_values(0.0, 1.0, [0.5, 0.5])[1] == pytest.approx(0.0, abs=1e-12)
    shifted = compute_critical_values(2.0, 3.0, [0.5, 0.5])
    assert shifted[1] == pytest.approx(2.0)


def test_critical_values_for_empty_modalities():
    values = compute_critical_values(0.0, 1.0, [0.0, 1.0, 0.0])
    assert values[1] == -math.inf
    assert values[2] == math.inf


def test_critical_values_reject_bad_probabilities():
    with pytest.raises(DomainError):
        compute_critical_values(0.0, 1.0, [0.7, 0.7])
    with pytest.raises(DomainError):
        compute_critical_values(0.0, 1.0, [1.0])


def test_bracket_assigns_modalities():
    critical = (-math.inf, 0.0, math.inf)
    assert list(bracket(np.array([-0.1, 0.0, 0.1]), critical)) == [0, 0, 1]
    three = (-math.inf, -1.0, 1.0, math.inf)
    assert list(bracket(np.array([-5.0, 0.0, 5.0]), three)) == [0, 1, 2]


def test_continuous_reproduces_category_frequencies():
    model = fit_continuous(_split_dataset(800, 200, seed=5))
    assert model.category_probs["Smoker"] == pytest.approx((0.8, 0.2))
    sample = sample_continuous(model, 10_000, 6)
    share = np.mean(sample.labels("Smoker") == "No")
    assert abs(share - 0.8) < 0.02


def test_continuous_preserves_means(pima):
    model = fit_continuous(pima)
    sample = sample_continuous(model, 20_000, 7)
    for name in ["Glucose", "Age"]:
        sd = pima.values(name).std()
        assert abs(sample.values(name).mean() - pima.values(name).mean()) < 0.1 * sd


def test_continuous_ridge_for_singular_covariance():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    data = MixedDataset(
        [continuous("a"), continuous("b")], pd.DataFrame({"a": x, "b": 2.0 * x})
    )
    model = fit_continuous(data)
    assert any("ridge" in d for d in model.diagnostics)
    assert sample_continuous(model, 10, 1).n == 10


def test_continuous_needs_more_rows_than_columns(pima):
    with pytest.raises(ShapeError):
        fit_continuous(pima.take(np.arange(5)))


# =============================================================================
# Dispatch and documents
# =============================================================================


def test_unknown_generator_kind(small_mixed):
    with pytest.raises(ConfigError):
        fit_generator("gan", small_mixed)


@pytest.mark.parametrize("kind", ["discrete", "continuous", "vine"])
def test_every_kind_keeps_the_schema(kind, small_mixed):
    model = fit_generator(kind, small_mixed, seed=1)
    sample = sample_generator(model, 40, 2)
    assert sample.schema == small_mixed.schema
    assert sample.n == 40


@pytest.mark.parametrize("kind", ["discrete", "continuous", "vine"])
def test_saved_model_samples_identically(kind, small_mixed, tmp_path):
    model = fit_generator(kind, small_mixed, seed=1)
    path = tmp_path / f"{kind}.json"
    save_model(path, model)
    reloaded = load_model(path)
    assert sample_generator(reloaded, 30, 5).equals(sample_generator(model, 30, 5))


def test_malformed_model_document():
    with pytest.raises(DataError):
        model_from_dict({"kind": "discrete", "schema": []})
    with pytest.raises(DataError):
        model_from_dict({"kind": "gan", "schema": []})


def test_model_document_has_kind_and_schema(small_mixed):
    document = model_to_dict(fit_discrete(small_mixed))
    assert document["kind"] == "discrete"
    assert [c["name"] for c in document["schema"]] == small_mixed.names
