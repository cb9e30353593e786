"""
The four period steps of the generic-switch scenario.

Each step works on a columnar ``Cohort`` and consumes caller-supplied uniforms,
so a run draws the same numbers whatever the scenario parameters. The
``step*`` functions are the per-patient forms of the same rules.

1. update covariates (durations, Markov chains, ARN/CREA, IR, death)
2. update treatment (switches, generic conversion)
3. add incident cases
4. assess the period costs of the no-switch and scenario arms
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from config.settings import MONTHS_PER_PERIOD
from data.models.dataset import MixedDataset
from data.models.scenario import (
    DURATION_COVARIATES,
    INTEGER_COVARIATES,
    PatientState,
    ScenarioConfig,
    ir_from_crea,
)
from execution.effects import ExecutionModels
from scenario.catalog import TreatmentCatalog
from scenario.pricing import price_at, prob_conv
from utils.errors import DataError, DomainError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

COVARIATES = [*INTEGER_COVARIATES, *DURATION_COVARIATES]


# =============================================================================
# Columnar cohort
# =============================================================================


@dataclass
class Cohort:
    """Patients as parallel arrays; ``values`` holds the covariates by name."""

    values: dict[str, NDArray[Any]]
    treatment: NDArray[np.object_]
    on_generic: NDArray[np.bool_]
    ever_generic: NDArray[np.bool_] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        n = len(self.treatment)
        if self.ever_generic is None:
            self.ever_generic = self.on_generic.copy()
        missing = [name for name in COVARIATES if name not in self.values]
        if missing:
            raise DataError(f"Cohort lacks covariates {missing}")
        if any(len(v) != n for v in self.values.values()):
            raise DataError("Cohort columns differ in length")

    @property
    def size(self) -> int:
        return len(self.treatment)

    @property
    def alive(self) -> NDArray[np.bool_]:
        return self.values["DEATH"] == 1

    def copy(self) -> "Cohort":
        return Cohort(
            {k: v.copy() for k, v in self.values.items()},
            self.treatment.copy(),
            self.on_generic.copy(),
            self.ever_generic.copy(),
        )

    def take(self, index: NDArray[np.int64]) -> "Cohort":
        return Cohort(
            {k: v[index] for k, v in self.values.items()},
            self.treatment[index],
            self.on_generic[index],
            self.ever_generic[index],
        )

    def extend(self, other: "Cohort") -> "Cohort":
        return Cohort(
            {k: np.concatenate([v, other.values[k]]) for k, v in self.values.items()},
            np.concatenate([self.treatment, other.treatment]),
            np.concatenate([self.on_generic, other.on_generic]),
            np.concatenate([self.ever_generic, other.ever_generic]),
        )

    # -------------------------------------------------------------------------
    # Conversion
    # -------------------------------------------------------------------------

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, treatment_column: str = "TREAT") -> "Cohort":
        missing = [c for c in [*COVARIATES, treatment_column] if c not in frame.columns]
        if missing:
            raise DataError(f"Baseline lacks columns {missing}")
        values: dict[str, NDArray[Any]] = {}
        for name in INTEGER_COVARIATES:
            values[name] = frame[name].astype(str).astype(float).astype(np.int64).to_numpy()
        for name in DURATION_COVARIATES:
            values[name] = frame[name].astype(float).to_numpy()
            if np.any(values[name] < 0):
                raise DataError(f"Negative duration in '{name}'")
        treatment = frame[treatment_column].astype(str).to_numpy(dtype=object)
        on_generic = (
            frame["on_generic"].astype(bool).to_numpy()
            if "on_generic" in frame.columns
            else np.zeros(len(frame), dtype=bool)
        )
        return cls(values, treatment, on_generic)

    @classmethod
    def from_dataset(cls, data: MixedDataset) -> "Cohort":
        return cls.from_frame(data.frame)

    @classmethod
    def from_states(cls, states: Sequence[PatientState]) -> "Cohort":
        frame = pd.DataFrame([dict(s) for s in states])
        frame = frame.rename(columns={"treatment_id": "TREAT"})
        return cls.from_frame(frame)

    def to_states(self) -> list[PatientState]:
        states = []
        for i in range(self.size):
            state = PatientState(
                treatment_id=str(self.treatment[i]), on_generic=bool(self.on_generic[i])
            )
            for name in INTEGER_COVARIATES:
                state[name] = int(self.values[name][i])  # type: ignore[literal-required]
            for name in DURATION_COVARIATES:
                state[name] = float(self.values[name][i])  # type: ignore[literal-required]
            states.append(state)
        return states


def draw_rows(probs: NDArray[np.float64], uniforms: NDArray[np.float64]) -> NDArray[np.int64]:
    """Row-wise inverse-CDF draw: index of the state selected by each uniform."""
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    index = (uniforms[:, None] >= cum).sum(axis=1)
    return np.minimum(index, probs.shape[1] - 1)


# =============================================================================
# Step 1: covariates
# =============================================================================


def _chain_step(values, alive, model, uniforms):
    states = model.states
    position = np.array([states.index(str(v)) for v in values[alive]], dtype=int)
    drawn = draw_rows(model.matrix[position], uniforms[alive])
    out = values.copy()
    out[alive] = np.asarray(states, dtype=float)[drawn].astype(np.int64)
    return out


def advance_covariates(
    cohort: Cohort,
    models: ExecutionModels,
    uniforms: Mapping[str, NDArray[np.float64]],
    invert_ir_rule: bool = False,
) -> Cohort:
    """
    Move every alive patient forward one period.

    ARN uses the covariates at the start of the period; CREA uses the new ARN.
    ``uniforms`` holds one array per drawn variable (HEART, DIAB, VIHS, ARN,
    CREA, DEATH), each of cohort size.
    """
    models.require_complete()
    alive = cohort.alive
    now = cohort.values
    nxt = {k: v.copy() for k, v in now.items()}

    for name in ("HEART", "DIAB", "VIHS"):
        nxt[name] = _chain_step(now[name], alive, models.chains[name], uniforms[name])

    rows = np.flatnonzero(alive)
    if rows.size:
        at_start = {k: v[rows] for k, v in now.items()}
        arn_probs = models.arn.probs_many(  # type: ignore[union-attr]
            now["ARN"][rows], {**at_start, "ARN_prev": now["ARN"][rows]}
        )
        arn_next = np.asarray(models.arn.states, dtype=float)[  # type: ignore[union-attr]
            draw_rows(arn_probs, uniforms["ARN"][rows])
        ].astype(np.int64)
        crea_probs = models.crea.probs_many(  # type: ignore[union-attr]
            now["CREA"][rows], {**at_start, "CREA_prev": now["CREA"][rows], "ARN": arn_next}
        )
        crea_next = np.asarray(models.crea.states, dtype=float)[  # type: ignore[union-attr]
            draw_rows(crea_probs, uniforms["CREA"][rows])
        ].astype(np.int64)
        nxt["ARN"][rows] = arn_next
        nxt["CREA"][rows] = crea_next
        nxt["IR"][rows] = ir_from_crea(crea_next, invert=invert_ir_rule)
        for name in DURATION_COVARIATES:
            nxt[name][rows] = now[name][rows] + MONTHS_PER_PERIOD

    nxt["DEATH"] = _chain_step(now["DEATH"], alive, models.chains["DEATH"], uniforms["DEATH"])
    return Cohort(
        nxt, cohort.treatment.copy(), cohort.on_generic.copy(), cohort.ever_generic.copy()
    )


# =============================================================================
# Step 2: treatment
# =============================================================================


def update_treatments(
    cohort: Cohort,
    catalog: TreatmentCatalog,
    cfg: ScenarioConfig,
    t: float,
    switch_uniforms: NDArray[np.float64],
    conversion_uniforms: NDArray[np.float64],
) -> Cohort:
    """
    Draw treatment switches, then generic conversions of non-switchers.

    A switch resets TREATD and ``on_generic``. A patient already on the generic
    stays on it while the treatment is unchanged; a patient converts when its
    conversion uniform falls below ``prob_conv(t)``.
    """
    catalog.require(cohort.treatment)
    out = cohort.copy()
    rows = np.flatnonzero(cohort.alive)
    if rows.size == 0:
        return out

    columns = {k: v[rows] for k, v in cohort.values.items()}
    probs = catalog.switch_probs(cohort.treatment[rows], columns)
    ids = np.asarray(catalog.ids, dtype=object)
    new = ids[draw_rows(probs, switch_uniforms[rows])]
    switched = new != cohort.treatment[rows]

    switched_rows = rows[switched]
    out.treatment[switched_rows] = new[switched]
    out.values["TREATD"][switched_rows] = 0.0
    out.on_generic[switched_rows] = False

    candidates = rows[~switched & ~cohort.on_generic[rows]]
    p = np.zeros(candidates.size)
    for treatment_id in np.unique(cohort.treatment[candidates]):
        mask = cohort.treatment[candidates] == treatment_id
        p[mask] = prob_conv(t, catalog.entry(treatment_id), cfg)
    converted = candidates[conversion_uniforms[candidates] < p]
    out.on_generic[converted] = True
    out.ever_generic[converted] = True
    return out


# =============================================================================
# Step 3: incident cases
# =============================================================================


def add_incident_cases(
    cohort: Cohort, pool: Cohort, count: int, rng: np.random.Generator
) -> Cohort:
    """
    Append ``count`` patients drawn with replacement from the baseline pool.

    Incident cases keep their baseline covariates and get a treatment drawn from
    the treatments currently prescribed to alive patients.
    """
    if count <= 0:
        return cohort
    if pool.size == 0:
        raise DataError("Baseline pool is empty")
    picks = rng.integers(0, pool.size, size=count)
    incident = pool.take(picks)
    current = cohort.treatment[cohort.alive]
    if current.size == 0:
        current = cohort.treatment
    if current.size == 0:
        raise DomainError("Incident cases need at least one current treatment to draw from")
    incident.treatment = current[rng.integers(0, current.size, size=count)].copy()
    incident.on_generic = np.zeros(count, dtype=bool)
    incident.ever_generic = np.zeros(count, dtype=bool)
    incident.values["DEATH"] = np.ones(count, dtype=np.int64)
    return cohort.extend(incident)


# =============================================================================
# Step 4: costs
# =============================================================================


def period_costs(
    cohort: Cohort, catalog: TreatmentCatalog, cfg: ScenarioConfig, t: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Per-patient costs of the period at date t.

    COST_B prices the treatment without generic conversion; COST_G prices the
    scenario arm (generic tariff when on the generic). Dead patients cost 0.
    """
    cost_b = np.zeros(cohort.size)
    cost_g = np.zeros(cohort.size)
    alive = cohort.alive
    for treatment_id in np.unique(cohort.treatment[alive]):
        entry = catalog.entry(treatment_id)
        rows = alive & (cohort.treatment == treatment_id)
        cost_b[rows] = price_at(t, entry, "counterfactual", cfg)
        generic = rows & cohort.on_generic
        branded = rows & ~cohort.on_generic
        cost_g[branded] = price_at(t, entry, "branded", cfg)
        if generic.any():
            cost_g[generic] = price_at(t, entry, "generic", cfg)
    return cost_b, cost_g


# =============================================================================
# Per-patient forms
# =============================================================================

DRAWN_VARIABLES = ("HEART", "DIAB", "VIHS", "ARN", "CREA", "DEATH")


def step1_update_covariates(
    state: PatientState,
    models: ExecutionModels,
    seed: int | np.random.Generator,
    invert_ir_rule: bool = False,
) -> PatientState:
    """Next-period covariates of one patient; a dead patient is returned unchanged."""
    if int(state.get("DEATH", 1)) == 0:
        return PatientState(**state)  # type: ignore[typeddict-item]
    rng = make_rng(seed)
    uniforms = {name: rng.random(1) for name in DRAWN_VARIABLES}
    cohort = advance_covariates(Cohort.from_states([state]), models, uniforms, invert_ir_rule)
    return cohort.to_states()[0]


def step2_update_treatment(
    state: PatientState,
    catalog: TreatmentCatalog,
    cfg: ScenarioConfig,
    t: float,
    seed: int | np.random.Generator,
) -> PatientState:
    rng = make_rng(seed)
    cohort = Cohort.from_states([state])
    return update_treatments(cohort, catalog, cfg, t, rng.random(1), rng.random(1)).to_states()[0]


def step3_update_cohort(
    cohort: Sequence[PatientState],
    baseline_pool: Sequence[PatientState],
    treatments_now: Mapping[str, float],
    cfg: ScenarioConfig,
    seed: int | np.random.Generator,
) -> list[PatientState]:
    """
    Cohort with the period's incident cases appended.

    ``treatments_now`` maps treatment ids to their current-period share.
    """
    if not baseline_pool:
        raise DataError("Baseline pool is empty")
    rng = make_rng(seed)
    count = int(cfg.get("incident_cases_per_step", 0))
    pool = list(baseline_pool)
    ids = list(treatments_now)
    weights = np.asarray([treatments_now[i] for i in ids], dtype=float)
    if count > 0:
        if not np.all(np.isfinite(weights)) or np.any(weights < 0) or weights.sum() <= 0:
            raise DomainError(
                "Incident cases need current-period treatment shares with positive mass"
            )
        weights = weights / weights.sum()
    incident = []
    for _ in range(count):
        drawn = pool[int(rng.integers(0, len(pool)))]
        patient = PatientState(**drawn)  # type: ignore[typeddict-item]
        patient["treatment_id"] = str(ids[int(rng.choice(len(ids), p=weights))])
        patient["on_generic"] = False
        patient["DEATH"] = 1
        incident.append(patient)
    return [*cohort, *incident]


def step4_period_costs(
    state: PatientState, catalog: TreatmentCatalog, cfg: ScenarioConfig, t: float
) -> tuple[float, float]:
    cost_b, cost_g = period_costs(Cohort.from_states([state]), catalog, cfg, t)
    return float(cost_b[0]), float(cost_g[0])
