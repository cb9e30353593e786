"""
JSON documents for execution models.

Markov models reload exactly. Outcome generators are stored descriptively
(classifier kind, covariates, confusion counts) since the classifier itself is
refit deterministically from its source data and seed.
"""

import os
from typing import Any

import numpy as np

from execution.effects import ExecutionModels, StateTransitionModel
from execution.markov import ConstantMarkovModel, CovariateMarkovModel
from execution.outcomes import ConfusionMatrix, OutcomeGenerator
from utils.errors import DataError
from utils.file_store import load_json, save_json

# =============================================================================
# Markov models
# =============================================================================


def constant_markov_to_dict(model: ConstantMarkovModel) -> dict[str, Any]:
    document: dict[str, Any] = {
        "kind": "constant_markov",
        "states": list(model.states),
        "matrix": model.matrix.tolist(),
    }
    if model.counts is not None:
        document["counts"] = model.counts.tolist()
    return document


def covariate_markov_to_dict(model: CovariateMarkovModel) -> dict[str, Any]:
    return {
        "kind": "covariate_markov",
        "states": list(model.states),
        "reference_state": model.reference_state,
        "covariates": list(model.covariates),
        "terms": list(model.terms),
        "coefficients": model.coefficients.tolist(),
        "levels": {k: list(v) for k, v in model.levels.items()},
        "loglik": model.loglik,
        "aic": model.aic,
        "n_obs": model.n_obs,
        "diagnostics": list(model.diagnostics),
    }


def markov_from_dict(document: dict[str, Any]) -> ConstantMarkovModel | CovariateMarkovModel:
    """Rebuild a constant or covariate Markov model."""
    try:
        kind = document["kind"]
        if kind == "constant_markov":
            counts = document.get("counts")
            return ConstantMarkovModel(
                tuple(document["states"]),
                np.asarray(document["matrix"], dtype=float),
                np.asarray(counts, dtype=np.int64) if counts is not None else None,
            )
        if kind == "covariate_markov":
            terms = tuple(document["terms"])
            states = tuple(document["states"])
            return CovariateMarkovModel(
                states=states,
                reference_state=document["reference_state"],
                covariates=tuple(document["covariates"]),
                terms=terms,
                coefficients=np.asarray(document["coefficients"], dtype=float).reshape(
                    len(states) - 1, len(terms)
                ),
                levels={k: tuple(v) for k, v in document.get("levels", {}).items()},
                loglik=float(document.get("loglik", 0.0)),
                aic=float(document.get("aic", 0.0)),
                n_obs=int(document.get("n_obs", 0)),
                diagnostics=tuple(document.get("diagnostics", ())),
            )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed Markov model document: {e}") from e
    raise DataError(f"Unknown execution model kind '{document.get('kind')}'")


def transitions_to_dict(model: StateTransitionModel) -> dict[str, Any]:
    return {
        "kind": "state_transitions",
        "name": model.name,
        "states": list(model.states),
        "constant_rows": {k: v.tolist() for k, v in model.constant_rows.items()},
        "covariate_models": {
            k: covariate_markov_to_dict(v) for k, v in model.covariate_models.items()
        },
        "source_counts": dict(model.source_counts),
    }


def transitions_from_dict(document: dict[str, Any]) -> StateTransitionModel:
    try:
        covariate_models = {}
        for source, entry in document.get("covariate_models", {}).items():
            model = markov_from_dict(entry)
            if not isinstance(model, CovariateMarkovModel):
                raise DataError(f"Source '{source}' holds a {entry.get('kind')} document")
            covariate_models[source] = model
        return StateTransitionModel(
            name=document["name"],
            states=tuple(document["states"]),
            constant_rows={
                k: np.asarray(v, dtype=float) for k, v in document["constant_rows"].items()
            },
            covariate_models=covariate_models,
            source_counts={k: int(v) for k, v in document.get("source_counts", {}).items()},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed transition model document: {e}") from e


# =============================================================================
# Outcome generators
# =============================================================================


def outcome_to_dict(gen: OutcomeGenerator) -> dict[str, Any]:
    classifier = gen.classifier
    return {
        "kind": "outcome",
        "classifier": classifier.kind,
        "outcome": classifier.outcome,
        "covariates": list(classifier.covariates),
        "labels": list(gen.noise.labels),
        "confusion": gen.noise.counts.tolist(),
        "error_rate": gen.noise.error_rate,
        "noise_enabled": gen.noise_enabled,
    }


def confusion_from_dict(document: dict[str, Any]) -> ConfusionMatrix:
    try:
        return ConfusionMatrix(tuple(document["labels"]), np.asarray(document["confusion"]))
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed outcome document: {e}") from e


# =============================================================================
# Model sets
# =============================================================================


def execution_models_to_dict(models: ExecutionModels) -> dict[str, Any]:
    document: dict[str, Any] = {
        "kind": "execution_models",
        "chains": {k: constant_markov_to_dict(v) for k, v in models.chains.items()},
        "diagnostics": list(models.diagnostics),
    }
    for name in ("arn", "crea", "switch"):
        model = getattr(models, name)
        document[name] = transitions_to_dict(model) if model is not None else None
    return document


def execution_models_from_dict(document: dict[str, Any]) -> ExecutionModels:
    if document.get("kind") != "execution_models":
        raise DataError(f"Expected an execution_models document, got '{document.get('kind')}'")
    chains = {}
    for name, entry in document.get("chains", {}).items():
        model = markov_from_dict(entry)
        if not isinstance(model, ConstantMarkovModel):
            raise DataError(f"Chain '{name}' must be a constant Markov model")
        chains[name] = model
    parts = {
        name: transitions_from_dict(document[name]) if document.get(name) else None
        for name in ("arn", "crea", "switch")
    }
    diagnostics = tuple(document.get("diagnostics", ()))
    return ExecutionModels(chains, parts["arn"], parts["crea"], parts["switch"], diagnostics)


def save_execution_models(path: str | os.PathLike[str], models: ExecutionModels) -> None:
    save_json(path, execution_models_to_dict(models))


def load_execution_models(path: str | os.PathLike[str]) -> ExecutionModels:
    return execution_models_from_dict(load_json(path))
