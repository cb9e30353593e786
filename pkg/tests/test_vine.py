from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
import pytest

from core.stats import kendall_tau, mvn_sample
from data.analytics import fidelity
from data.models.dataset import MixedDataset, continuous
from generators.copulas import PairCopula
from generators.serialization import model_from_dict, model_to_dict
from generators.vine import (
    build_vine,
    fit_vine,
    sample_copula,
    sample_vine,
    sampling_order,
    validate_structure,
    vine_summary,
)
from utils.errors import DomainError, ShapeError


def _gaussian_dataset(corr, n, seed):
    d = len(corr)
    sample = mvn_sample(np.zeros(d), corr, n, seed)
    schema = [continuous(f"x{j}") for j in range(d)]
    return MixedDataset(schema, pd.DataFrame(sample, columns=[c.name for c in schema]))


def test_two_columns_give_one_edge():
    data = _gaussian_dataset([[1.0, 0.5], [0.5, 1.0]], 300, 1)
    model = fit_vine(data, seed=0)
    assert len(model.trees) == 1
    assert model.n_pair_copulas == 1
    assert validate_structure(model) == []


def test_first_tree_joins_strongest_pairs():
    corr = np.array([[1.0, 0.8, 0.6], [0.8, 1.0, 0.1], [0.6, 0.1, 1.0]])
    data = _gaussian_dataset(corr, 2000, 2)
    model = fit_vine(data, seed=0)
    first_tree = {frozenset((e.first, e.second)) for e in model.trees[0]}
    assert first_tree == {frozenset((0, 1)), frozenset((0, 2))}


def test_five_columns_give_ten_pair_copulas(pima):
    data = pima.select(["Glucose", "BloodPressure", "SkinThickness", "Insulin", "BMI"])
    model = fit_vine(data, seed=3)
    assert model.n_pair_copulas == 10
    assert [len(t) for t in model.trees] == [4, 3, 2, 1]
    assert validate_structure(model) == []


def test_fit_vine_input_errors(pima):
    with pytest.raises(ShapeError):
        fit_vine(pima.select(["Glucose"]))
    with pytest.raises(ShapeError):
        fit_vine(pima.select(["Glucose", "Age"]).take(np.arange(10)))


def test_independence_vine_samples_are_uncorrelated():
    schema = [continuous("a"), continuous("b"), continuous("c")]
    model = build_vine(
        schema,
        [[(0, 1, PairCopula()), (1, 2, PairCopula())], [(0, 1, PairCopula())]],
    )
    u = sample_copula(model, 10_000, 5)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert abs(kendall_tau(u[:, i], u[:, j])) < 0.05
    assert np.all((u > 0) & (u < 1))


def test_gaussian_pair_sample_tau():
    model = build_vine([continuous("a"), continuous("b")], [[(0, 1, PairCopula("gaussian", 0.7))]])
    u = sample_copula(model, 10_000, 6)
    assert 0.44 <= kendall_tau(u[:, 0], u[:, 1]) <= 0.54


def test_samples_stay_on_fitted_support(pima):
    data = pima.select(["Glucose", "Age", "BMI"])
    model = fit_vine(data, seed=1)
    sample = sample_vine(model, 500, 2)
    assert set(sample.values("Glucose")) <= set(data.values("Glucose"))
    assert set(sample.labels("BMI")) <= set(data.column_schema("BMI").categories)


def test_categorical_proportions_are_reproduced(pima):
    data = pima.select(["Pregnant", "BMI", "Glucose"])
    model = fit_vine(data, seed=4)
    sample = sample_vine(model, 10_000, 8)
    for name in ["Pregnant", "BMI"]:
        original = pd.Series(data.labels(name)).value_counts(normalize=True)
        drawn = pd.Series(sample.labels(name)).value_counts(normalize=True)
        for label, p in original.items():
            assert abs(drawn.get(label, 0.0) - p) < 0.03


@pytest.mark.slow
def test_refit_recovers_known_vine():
    schema = [continuous("a"), continuous("b"), continuous("c")]
    truth = build_vine(
        schema,
        [
            [(0, 1, PairCopula("gaussian", 0.7)), (1, 2, PairCopula("clayton", 2.0))],
            [(0, 1, PairCopula("frank", 3.0))],
        ],
    )
    u = sample_copula(truth, 5000, 11)
    data = MixedDataset(schema, pd.DataFrame(u, columns=["a", "b", "c"]))
    fitted = fit_vine(data, seed=0)
    expected = {
        (e.first, e.second, e.conditioning): e.copula.kendall_tau() for e in truth.edges()
    }
    for edge in fitted.edges():
        key = (edge.first, edge.second, edge.conditioning)
        if key in expected:
            assert abs(edge.copula.kendall_tau() - expected[key]) < 0.05


def test_sampling_is_deterministic(pima):
    model = fit_vine(pima.select(["Glucose", "Insulin", "Pregnant"]), seed=2)
    assert sample_vine(model, 50, 9).equals(sample_vine(model, 50, 9))


def test_sampling_order_covers_every_variable(pima):
    model = fit_vine(pima.select(["Glucose", "Insulin", "Age", "Pedigree"]), seed=2)
    assert sorted(var for var, _ in sampling_order(model)) == [0, 1, 2, 3]


def test_build_vine_rejects_non_adjacent_second_tree():
    schema = [continuous(n) for n in "abcd"]
    with pytest.raises(DomainError):
        build_vine(
            schema,
            [
                [(0, 1, PairCopula()), (2, 3, PairCopula()), (1, 2, PairCopula())],
                [(0, 1, PairCopula()), (1, 2, PairCopula())],
                [(0, 1, PairCopula())],
            ],
        )


def test_vine_document_reloads(pima):
    model = fit_vine(pima.select(["Glucose", "BMI", "Age"]), seed=5)
    document = model_to_dict(model)
    assert len(vine_summary(model)) == 3
    reloaded = model_from_dict(document)
    assert reloaded.n_pair_copulas == 3
    assert sample_vine(reloaded, 20, 1).equals(sample_vine(model, 20, 1))


def test_concurrent_sampling_leaves_fit_diagnostics_alone(pima):
    data = pima.select(["Glucose", "Insulin", "Age"])
    serial = fit_vine(data, seed=2)
    extreme = build_vine(
        [continuous("a"), continuous("b"), continuous("c")],
        [
            [(0, 1, PairCopula("clayton", 40.0)), (1, 2, PairCopula("gumbel", 40.0))],
            [(0, 1, PairCopula("clayton", 30.0, 180))],
        ],
    )
    with ThreadPoolExecutor(max_workers=4) as pool:
        samples = [pool.submit(sample_copula, extreme, 20_000, s) for s in range(3)]
        fitted = pool.submit(fit_vine, data, 2)
        for future in samples:
            future.result()
        assert fitted.result().diagnostics == serial.diagnostics


def test_vine_samples_match_source_marginals(pima):
    model = fit_vine(pima, seed=6)
    report = fidelity(pima, sample_vine(model, 10_000, 7))
    ks = [c["value"] for c in report["columns"].values() if c["metric"] == "ks"]
    assert len(ks) == 6
    assert float(np.median(ks)) < 0.1
