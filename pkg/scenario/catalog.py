"""
Treatment catalog: tariffs and marketing dates per treatment, plus the model
driving treatment switches.
"""

import logging
import math
import os
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from data.models.scenario import TreatmentEntry
from execution.effects import StateTransitionModel
from execution.markov import ConstantMarkovModel
from execution.serialization import markov_from_dict, transitions_from_dict, transitions_to_dict
from utils.errors import ConfigError, DataError
from utils.file_store import load_json, save_json

logger = logging.getLogger(__name__)


def _as_transitions(model: ConstantMarkovModel) -> StateTransitionModel:
    rows = {state: model.matrix[i] for i, state in enumerate(model.states)}
    return StateTransitionModel("TREAT", model.states, constant_rows=rows)


@dataclass(frozen=True)
class TreatmentCatalog:
    """Treatments by id; ``switch_model`` gives per-period switch probabilities."""

    entries: dict[str, TreatmentEntry]
    switch_model: StateTransitionModel | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigError("catalog holds no treatment", field="treatments")
        for treatment_id, entry in self.entries.items():
            cost = entry.get("MEDCOSTB")
            if not isinstance(cost, int | float) or not math.isfinite(cost) or cost <= 0:
                raise ConfigError(f"MEDCOSTB of '{treatment_id}' must be > 0", field="MEDCOSTB")
            if "AMMT" not in entry:
                raise ConfigError(f"'{treatment_id}' has no AMMT", field="AMMT")
            if "AMMGM" in entry and float(entry["AMMGM"]) < float(entry["AMMT"]):
                raise ConfigError(f"AMMGM precedes AMMT for '{treatment_id}'", field="AMMGM")

    @property
    def ids(self) -> list[str]:
        return list(self.entries)

    def entry(self, treatment_id: str) -> TreatmentEntry:
        try:
            return self.entries[str(treatment_id)]
        except KeyError:
            raise DataError(f"Treatment '{treatment_id}' absent from catalog") from None

    def require(self, treatment_ids: Iterable[str]) -> None:
        """Raise DataError naming every id missing from the catalog."""
        unknown = sorted(set(map(str, treatment_ids)) - set(self.entries))
        if unknown:
            raise DataError(f"Treatments {unknown} absent from catalog")

    def with_switch_model(
        self, model: StateTransitionModel | ConstantMarkovModel | None
    ) -> "TreatmentCatalog":
        if isinstance(model, ConstantMarkovModel):
            model = _as_transitions(model)
        return TreatmentCatalog(self.entries, model)

    def switch_probs(self, treatments: np.ndarray, columns: dict[str, Any]) -> np.ndarray:
        """
        Switch probabilities over ``ids`` for each patient.

        Treatments unknown to the switch model keep their treatment.
        """
        ids = self.ids
        out = np.zeros((len(treatments), len(ids)))
        current = np.asarray([ids.index(str(t)) for t in treatments], dtype=int)
        if self.switch_model is None:
            out[np.arange(len(treatments)), current] = 1.0
            return out
        probs = self.switch_model.probs_many(np.asarray(treatments), columns)
        for j, state in enumerate(self.switch_model.states):
            if state in self.entries:
                out[:, ids.index(state)] += probs[:, j]
        empty = out.sum(axis=1) <= 0.0
        out[empty] = 0.0
        out[np.flatnonzero(empty), current[empty]] = 1.0
        return out / out.sum(axis=1, keepdims=True)


def catalog_to_dict(catalog: TreatmentCatalog) -> dict[str, Any]:
    document: dict[str, Any] = {"treatments": [dict(e) for e in catalog.entries.values()]}
    if catalog.switch_model is not None:
        document["switch_model"] = transitions_to_dict(catalog.switch_model)
    return document


def catalog_from_dict(document: dict[str, Any]) -> TreatmentCatalog:
    try:
        entries: dict[str, TreatmentEntry] = {}
        for raw in document["treatments"]:
            entry = TreatmentEntry(
                treatment_id=str(raw["treatment_id"]),
                NAMET=str(raw.get("NAMET", raw["treatment_id"])),
                MEDCOSTB=float(raw["MEDCOSTB"]),
                AMMT=float(raw["AMMT"]),
                has_generic=bool(raw.get("has_generic", False)),
            )
            if raw.get("AMMGM") is not None:
                entry["AMMGM"] = float(raw["AMMGM"])
            treatment_id = entry["treatment_id"]
            if treatment_id in entries:
                raise ConfigError(f"duplicate treatment '{treatment_id}'", field="treatments")
            entries[treatment_id] = entry
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed treatment entry: {e}", field="treatments") from e

    switch = document.get("switch_model")
    model: StateTransitionModel | ConstantMarkovModel | None = None
    if switch is not None:
        if switch.get("kind") == "state_transitions":
            model = transitions_from_dict(switch)
        else:
            loaded = markov_from_dict(switch)
            if not isinstance(loaded, ConstantMarkovModel):
                raise DataError("A covariate switch model must be stored per source treatment")
            model = loaded
    return TreatmentCatalog(entries).with_switch_model(model)


def load_catalog(path: str | os.PathLike[str]) -> TreatmentCatalog:
    catalog = catalog_from_dict(load_json(path))
    logger.info(f"📋 Catalog with {len(catalog.entries)} treatments")
    return catalog


def save_catalog(path: str | os.PathLike[str], catalog: TreatmentCatalog) -> None:
    save_json(path, catalog_to_dict(catalog))
