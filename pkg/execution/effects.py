"""
Calibration of the execution models that drive the cohort from one period to
the next.

HEART, DIAB, VIHS and DEATH follow constant Markov chains. ARN, CREA and the
treatment switches are modeled per source state: a source state observed in at
least ``rare_transition_threshold`` transitions gets a multinomial logit on its
candidate covariates (backward stepwise), rarer source states keep constant
transition probabilities.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from config.settings import (
    ARN_CANDIDATES,
    CONSTANT_CHAINS,
    CREA_CANDIDATES,
    DEFAULT_RARE_TRANSITION_THRESHOLD,
    MONTHS_PER_PERIOD,
    SWITCH_CANDIDATES,
)
from data.models.dataset import ColumnSchema, MixedDataset, categorical, continuous
from data.models.scenario import ARN_LEVELS, CREA_LEVELS
from execution.logit import Criterion, fit_multinomial_logit
from execution.markov import (
    ConstantMarkovModel,
    CovariateMarkovModel,
    fit_constant_markov,
    transition_probs,
    transition_probs_many,
)
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

BINARY_LEVELS = ("0", "1")
CONTINUOUS_COVARIATES = {"AGE", "VIHD", "TREATD"}
COVARIATE_LEVELS: dict[str, tuple[str, ...]] = {
    "ARN": ARN_LEVELS,
    "ARN_prev": ARN_LEVELS,
    "CREA": CREA_LEVELS,
    "CREA_prev": CREA_LEVELS,
}


# =============================================================================
# Per-source transition models
# =============================================================================


@dataclass(frozen=True)
class StateTransitionModel:
    """Transitions out of each source state, constant or covariate-dependent."""

    name: str
    states: tuple[str, ...]
    constant_rows: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    covariate_models: dict[str, CovariateMarkovModel] = field(default_factory=dict)
    source_counts: dict[str, int] = field(default_factory=dict)

    @property
    def covariates(self) -> set[str]:
        return {c for m in self.covariate_models.values() for c in m.covariates}

    def _expand(self, model: CovariateMarkovModel, probs: NDArray[np.float64]):
        full = np.zeros(probs.shape[:-1] + (len(self.states),))
        full[..., [self.states.index(s) for s in model.states]] = probs
        return full

    def _self_loop(self, source: str) -> NDArray[np.float64]:
        row = np.zeros(len(self.states))
        if source in self.states:
            row[self.states.index(source)] = 1.0
        return row

    def probs(self, source: str, covariates: Mapping[str, Any]) -> NDArray[np.float64]:
        """Destination probabilities for one source state (self-loop if unseen)."""
        source = str(source)
        if source in self.covariate_models:
            model = self.covariate_models[source]
            return self._expand(model, transition_probs(model, covariates))
        if source in self.constant_rows:
            return self.constant_rows[source]
        return self._self_loop(source)

    def probs_many(
        self, sources: NDArray[Any], columns: Mapping[str, NDArray[Any]]
    ) -> NDArray[np.float64]:
        """n x len(states) destination probabilities for arrays of patients."""
        labels = np.asarray(sources).astype(str)
        out = np.zeros((labels.size, len(self.states)))
        for source in np.unique(labels):
            rows = np.flatnonzero(labels == source)
            if source in self.covariate_models:
                model = self.covariate_models[source]
                subset = {name: np.asarray(columns[name])[rows] for name in model.covariates}
                out[rows] = self._expand(model, transition_probs_many(model, subset, rows.size))
            elif source in self.constant_rows:
                out[rows] = self.constant_rows[source]
            else:
                out[rows] = self._self_loop(source)
        return out

    @property
    def diagnostics(self) -> list[str]:
        return [d for m in self.covariate_models.values() for d in m.diagnostics]


def _column_schema(name: str, states: Sequence[str]) -> ColumnSchema:
    if name in CONTINUOUS_COVARIATES:
        return continuous(name)
    return categorical(name, list(COVARIATE_LEVELS.get(name, BINARY_LEVELS)))


def fit_state_transitions(
    table: pd.DataFrame,
    name: str,
    source: str,
    target: str,
    states: Sequence[str],
    candidates: Sequence[str],
    threshold: int = DEFAULT_RARE_TRANSITION_THRESHOLD,
    criterion: Criterion = "aic",
) -> StateTransitionModel:
    """
    Calibrate transitions ``source -> target`` from a transition table.

    Args:
        table: One row per observed transition with the source, target and
            covariate columns
        name: Model name used in diagnostics
        states: Ordered state labels
        candidates: Covariates offered to the stepwise logit
        threshold: Minimum number of transitions out of a source state for a
            covariate model
    """
    states = tuple(str(s) for s in states)
    covariates = [c for c in candidates if c != source]
    constant_rows: dict[str, NDArray[np.float64]] = {}
    covariate_models: dict[str, CovariateMarkovModel] = {}
    counts: dict[str, int] = {}

    sources = table[source].astype(str)
    targets = table[target].astype(str)
    for state in states:
        mask = (sources == state).to_numpy()
        n = int(mask.sum())
        counts[state] = n
        if n == 0:
            continue
        if n < threshold or not covariates:
            freq = targets[mask].value_counts()
            row = np.array([freq.get(s, 0) for s in states], dtype=float)
            constant_rows[state] = row / row.sum()
            continue

        schema = [categorical(target, list(states))] + [
            _column_schema(c, states) for c in covariates
        ]
        frame = _as_labels(
            table.loc[mask, [target, *covariates]],
            [col.name for col in schema if col.is_categorical],
        )
        data = MixedDataset(schema, frame)
        covariate_models[state] = fit_multinomial_logit(
            data, target, covariates, stepwise=True, criterion=criterion
        )

    logger.info(
        f"✅ {name}: {len(covariate_models)} covariate and "
        f"{len(constant_rows)} constant source states"
    )
    return StateTransitionModel(name, states, constant_rows, covariate_models, counts)


# =============================================================================
# Model set
# =============================================================================


@dataclass(frozen=True)
class ExecutionModels:
    """Execution models used by the period steps."""

    chains: dict[str, ConstantMarkovModel]
    arn: StateTransitionModel | None
    crea: StateTransitionModel | None
    switch: StateTransitionModel | None = None
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def missing(self) -> list[str]:
        """Names of the execution models that are not available."""
        absent = [name for name in CONSTANT_CHAINS if name not in self.chains]
        if self.arn is None:
            absent.append("ARN")
        if self.crea is None:
            absent.append("CREA")
        return absent

    def require_complete(self) -> None:
        absent = self.missing()
        if absent:
            raise ConfigError(f"missing execution models {absent}", field="models")


def transition_table(histories: pd.DataFrame) -> pd.DataFrame:
    """
    Pair each patient-period row with the next period of the same patient.

    Next-period values get a ``_next`` suffix; the switch covariate TREATD is the
    elapsed duration on the current treatment at the next period.
    """
    required = {"PATIENT", "PERIOD", "TREAT", "TREATD", *CONSTANT_CHAINS, "ARN", "CREA"}
    missing = sorted(required - set(histories.columns))
    if missing:
        raise DataError(f"Histories lack columns {missing}")

    ordered = histories.sort_values(["PATIENT", "PERIOD"]).reset_index(drop=True)
    following = ordered.groupby("PATIENT").shift(-1)
    consecutive = (following["PERIOD"] - ordered["PERIOD"]) == 1
    table = ordered.loc[consecutive].copy()
    for col in following.columns:
        if col != "PERIOD":
            table[f"{col}_next"] = following.loc[consecutive, col]
    return table.reset_index(drop=True)


def calibrate_execution_models(
    histories: pd.DataFrame,
    treatment_ids: Sequence[str] | None = None,
    rare_transition_threshold: int = DEFAULT_RARE_TRANSITION_THRESHOLD,
    criterion: Criterion = "aic",
) -> ExecutionModels:
    """
    Calibrate every execution model from per-patient semester histories.

    Args:
        histories: Long table with PATIENT, PERIOD and the patient covariates,
            one row per patient and period
        treatment_ids: Treatment labels of the switch model (default: observed)
        rare_transition_threshold: Transitions needed for a covariate model
    """
    table = transition_table(histories)
    if table.empty:
        raise DataError("Histories contain no consecutive periods")
    alive = table[table["DEATH_next"].astype(int) == 1]

    chains: dict[str, ConstantMarkovModel] = {}
    for name in CONSTANT_CHAINS:
        sequences = [
            group[name].astype(int).astype(str).tolist()
            for _, group in histories.sort_values("PERIOD").groupby("PATIENT")
        ]
        chains[name] = fit_constant_markov(sequences, states=BINARY_LEVELS)

    arn_table = alive.rename(columns={"ARN": "ARN_prev"})
    arn = fit_state_transitions(
        _as_labels(arn_table, ["ARN_prev", "ARN_next"]),
        "ARN",
        "ARN_prev",
        "ARN_next",
        ARN_LEVELS,
        ARN_CANDIDATES,
        rare_transition_threshold,
        criterion,
    )

    crea_table = alive.drop(columns=["ARN"]).rename(
        columns={"CREA": "CREA_prev", "ARN_next": "ARN"}
    )
    crea = fit_state_transitions(
        _as_labels(crea_table, ["CREA_prev", "CREA_next", "ARN"]),
        "CREA",
        "CREA_prev",
        "CREA_next",
        CREA_LEVELS,
        CREA_CANDIDATES,
        rare_transition_threshold,
        criterion,
    )

    switch_table = alive.drop(columns=["ARN", "VIHS", "TREATD"]).rename(
        columns={"ARN_next": "ARN", "VIHS_next": "VIHS"}
    )
    switch_table["TREATD"] = alive["TREATD"].astype(float) + MONTHS_PER_PERIOD
    ids = treatment_ids if treatment_ids is not None else sorted(
        set(histories["TREAT"].astype(str))
    )
    switch = fit_state_transitions(
        _as_labels(switch_table, ["TREAT", "TREAT_next", "ARN", "VIHS"]),
        "TREAT",
        "TREAT",
        "TREAT_next",
        [str(i) for i in ids],
        SWITCH_CANDIDATES,
        rare_transition_threshold,
        criterion,
    )

    diagnostics = tuple(arn.diagnostics + crea.diagnostics + switch.diagnostics)
    return ExecutionModels(chains, arn, crea, switch, diagnostics)


def _as_labels(table: pd.DataFrame, columns: list[str]) -> pd.DataFrame:
    """Integer-coded state columns as string labels."""
    out = table.copy()
    for col in columns:
        values = out[col]
        if pd.api.types.is_float_dtype(values):
            values = values.astype(int)
        out[col] = values.astype(str)
    return out
