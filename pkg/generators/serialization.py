"""
JSON documents for fitted generator models.

Every document carries ``kind`` and ``schema``; the remaining keys depend on the
generator. Infinite critical values are implied and not stored.
"""

import math
import os
from typing import Any

import numpy as np

from core.stats import CovarianceMatrix, EmpiricalMargin
from data.models.dataset import schema_from_list, schema_to_list
from generators.continuous import ContinuousVBGModel
from generators.copulas import PairCopula
from generators.discrete import ConfigurationEntry, DiscreteVBGModel
from generators.vine import CategoricalMargin, Margin, VineCopulaModel, VineEdge
from utils.errors import DataError
from utils.file_store import load_json, save_json

GeneratorModel = DiscreteVBGModel | ContinuousVBGModel | VineCopulaModel


# =============================================================================
# Encoding
# =============================================================================


def _margin_to_dict(margin: Margin) -> dict[str, Any]:
    if margin is None:
        return {"kind": "uniform"}
    if isinstance(margin, CategoricalMargin):
        return {"kind": "categorical", "probabilities": list(margin.probabilities)}
    return {"kind": "empirical", "values": margin.sorted_values.tolist()}


def model_to_dict(model: GeneratorModel) -> dict[str, Any]:
    """Serializable document of a fitted generator."""
    document: dict[str, Any] = {"schema": schema_to_list(model.schema)}
    if isinstance(model, DiscreteVBGModel):
        document["kind"] = "discrete"
        document["configurations"] = [
            {
                "labels": list(key),
                "probability": entry.probability,
                "mean": entry.mean.tolist(),
                "cov": entry.cov.to_list(),
                "n_rows": entry.n_rows,
                "pooled": entry.pooled,
            }
            for key, entry in model.config_table.items()
        ]
    elif isinstance(model, ContinuousVBGModel):
        document["kind"] = "continuous"
        document["mean"] = model.mean.tolist()
        document["cov"] = model.cov.to_list()
        document["critical_values"] = {
            name: list(values[1:-1]) for name, values in model.critical_values.items()
        }
        document["category_probs"] = {k: list(v) for k, v in model.category_probs.items()}
    else:
        document["kind"] = "vine"
        document["trees"] = [
            [
                {
                    "first": edge.first,
                    "second": edge.second,
                    "conditioning": sorted(edge.conditioning),
                    "nodes": list(edge.nodes),
                    "tau": edge.tau,
                    "aic": edge.aic,
                    **edge.copula.to_dict(),
                }
                for edge in tree
            ]
            for tree in model.trees
        ]
        document["margins"] = [_margin_to_dict(m) for m in model.margins]
    document["diagnostics"] = list(model.diagnostics)
    return document


# =============================================================================
# Decoding
# =============================================================================


def _margin_from_dict(entry: dict[str, Any]) -> Margin:
    kind = entry.get("kind")
    if kind == "uniform":
        return None
    if kind == "categorical":
        return CategoricalMargin(tuple(float(p) for p in entry["probabilities"]))
    if kind == "empirical":
        return EmpiricalMargin(np.asarray(entry["values"], dtype=float))
    raise DataError(f"Unknown margin kind '{kind}'")


def model_from_dict(document: dict[str, Any]) -> GeneratorModel:
    """Rebuild a generator from ``model_to_dict`` output."""
    try:
        kind = document["kind"]
        schema = schema_from_list(document["schema"])
        diagnostics = tuple(document.get("diagnostics", ()))
        if kind == "discrete":
            table = {
                tuple(c["labels"]): ConfigurationEntry(
                    probability=float(c["probability"]),
                    mean=np.asarray(c["mean"], dtype=float),
                    cov=CovarianceMatrix(np.asarray(c["cov"], dtype=float).reshape(
                        len(c["mean"]), len(c["mean"])
                    )),
                    n_rows=int(c.get("n_rows", 0)),
                    pooled=bool(c.get("pooled", False)),
                )
                for c in document["configurations"]
            }
            return DiscreteVBGModel(schema, table, diagnostics)
        if kind == "continuous":
            critical = {
                name: (-math.inf, *(float(x) for x in inner), math.inf)
                for name, inner in document["critical_values"].items()
            }
            probs = {k: tuple(float(p) for p in v) for k, v in document["category_probs"].items()}
            return ContinuousVBGModel(
                schema,
                np.asarray(document["mean"], dtype=float),
                CovarianceMatrix(np.asarray(document["cov"], dtype=float)),
                critical,
                probs,
                diagnostics,
            )
        if kind == "vine":
            trees = [
                [
                    VineEdge(
                        first=int(e["first"]),
                        second=int(e["second"]),
                        conditioning=frozenset(int(x) for x in e["conditioning"]),
                        nodes=(int(e["nodes"][0]), int(e["nodes"][1])),
                        copula=PairCopula.from_dict(e),
                        tau=float(e.get("tau", 0.0)),
                        aic=float(e.get("aic", 0.0)),
                    )
                    for e in tree
                ]
                for tree in document["trees"]
            ]
            margins = [_margin_from_dict(m) for m in document["margins"]]
            return VineCopulaModel(schema, trees, margins, diagnostics)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed generator document: {e}") from e
    raise DataError(f"Unknown generator kind '{document.get('kind')}'")


def save_model(path: str | os.PathLike[str], model: GeneratorModel) -> None:
    save_json(path, model_to_dict(model))


def load_model(path: str | os.PathLike[str]) -> GeneratorModel:
    return model_from_dict(load_json(path))
