"""
Data models for the generic-switch scenario engine.

Dates are decimal years (T1 = ``start_year``, one period = half a year). Binary
covariates use 0/1, ARN uses 0/1/2 and CREA 1/2/3; DEATH is 1 while the patient
is alive and 0 afterwards.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, TypedDict

import numpy as np
from numpy.typing import NDArray

from config.settings import (
    DEFAULT_AMMGM_OFFSET_YEARS,
    DEFAULT_ANNUAL_TARIFF_DECAY,
    DEFAULT_BRANDED_DROP,
    DEFAULT_GENERIC_PRICE_FRACTION,
    DEFAULT_INCIDENT_CASES,
    DEFAULT_N_RUNS,
    DEFAULT_PENTIME_OFFSET_YEARS,
    DEFAULT_POPULATION_FRACTION,
    GENERIC_PRICE_FRACTION_RANGE,
    HORIZON_PERIODS,
)
from data.models.dataset import ColumnSchema, categorical, continuous
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

# =============================================================================
# Patient state
# =============================================================================


class PatientState(TypedDict, total=False):
    """Covariates and treatment of one patient at one follow-up time."""

    # Fixed in time
    SEX: int
    BC: int
    CONTA: int

    # Durations in months
    AGE: float
    VIHD: float
    TREATD: float

    # Markov-driven
    VIHS: int
    HEART: int
    DIAB: int
    DEATH: int
    ARN: int
    CREA: int

    # Derived from CREA
    IR: int

    # Treatment
    treatment_id: str
    on_generic: bool


BINARY_COVARIATES = ["SEX", "BC", "CONTA", "VIHS", "HEART", "DIAB", "IR", "DEATH"]
DURATION_COVARIATES = ["AGE", "VIHD", "TREATD"]
ARN_LEVELS = ("0", "1", "2")
CREA_LEVELS = ("1", "2", "3")
INTEGER_COVARIATES = [*BINARY_COVARIATES, "ARN", "CREA"]


def baseline_schema(treatment_ids: list[str]) -> list[ColumnSchema]:
    """Column declaration of a baseline cohort file (one row per patient at T1)."""
    schema = [
        categorical("SEX", ["0", "1"]),
        continuous("AGE"),
        categorical("BC", ["0", "1"]),
        categorical("CONTA", ["0", "1"]),
        categorical("VIHS", ["0", "1"]),
        continuous("VIHD"),
        continuous("TREATD"),
        categorical("ARN", list(ARN_LEVELS)),
        categorical("HEART", ["0", "1"]),
        categorical("DIAB", ["0", "1"]),
        categorical("IR", ["0", "1"]),
        categorical("CREA", list(CREA_LEVELS)),
        categorical("DEATH", ["0", "1"]),
        categorical("TREAT", treatment_ids),
    ]
    return schema


def ir_from_crea(crea: int | NDArray[np.int64], invert: bool = False):
    """IR = 1 when CREA is 1 or 2, 0 when CREA is 3 (reversed when ``invert``)."""
    crea_arr = np.asarray(crea)
    ir = np.where(crea_arr == 3, 1, 0) if invert else np.where(crea_arr == 3, 0, 1)
    return int(ir) if ir.ndim == 0 else ir.astype(np.int64)


# =============================================================================
# Treatments
# =============================================================================


class TreatmentEntry(TypedDict, total=False):
    """One treatment (combination of drugs) of the catalog."""

    treatment_id: str
    NAMET: str
    MEDCOSTB: float  # euros per period before generic entry
    AMMT: float  # marketing authorization of the branded drug (decimal year)
    AMMGM: float  # marketing authorization of the generic (decimal year)
    has_generic: bool


# =============================================================================
# Scenario configuration
# =============================================================================


class ScenarioConfig(TypedDict, total=False):
    """Parameters of one generic-switch scenario."""

    PENRATE: float
    AMMGM_offset: float  # years after AMMT, used when a treatment has no AMMGM
    PENTIME_offset: float  # years after AMMGM
    PENTIME_overrides: dict[str, float]  # treatment_id -> PENTIME
    generic_price_fraction: float
    branded_drop_at_generic: float
    annual_tariff_decay: float
    counterfactual_branded_drop: bool
    horizon: int
    start_year: float
    incident_cases_per_step: int
    population_fraction: float
    n_runs: int
    invert_ir_rule: bool
    record_trajectories: bool


def create_default_scenario_config(penrate: float = 0.40) -> ScenarioConfig:
    """
    Create default scenario configuration.

    Args:
        penrate: Long-run penetration rate of the generic

    Returns:
        Fully populated configuration
    """
    return ScenarioConfig(
        PENRATE=penrate,
        AMMGM_offset=float(DEFAULT_AMMGM_OFFSET_YEARS),
        PENTIME_offset=float(DEFAULT_PENTIME_OFFSET_YEARS),
        PENTIME_overrides={},
        generic_price_fraction=DEFAULT_GENERIC_PRICE_FRACTION,
        branded_drop_at_generic=DEFAULT_BRANDED_DROP,
        annual_tariff_decay=DEFAULT_ANNUAL_TARIFF_DECAY,
        counterfactual_branded_drop=False,
        horizon=HORIZON_PERIODS,
        start_year=2018.0,
        incident_cases_per_step=DEFAULT_INCIDENT_CASES,
        population_fraction=DEFAULT_POPULATION_FRACTION,
        n_runs=DEFAULT_N_RUNS,
        invert_ir_rule=False,
        record_trajectories=False,
    )


def _fraction(cfg: dict[str, Any], name: str, allow_one: bool = True) -> float:
    value = cfg.get(name)
    if not isinstance(value, int | float) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigError("must be a number", field=name)
    upper_ok = value <= 1.0 if allow_one else value < 1.0
    if value < 0.0 or not upper_ok:
        raise ConfigError(f"must lie in [0, 1], got {value}", field=name)
    return float(value)


def validate_scenario_config(cfg: dict[str, Any]) -> ScenarioConfig:
    """
    Merge ``cfg`` over the defaults and validate every field.

    Raises:
        ConfigError: unknown key or invalid value, naming the field
    """
    merged: dict[str, Any] = dict(create_default_scenario_config())
    unknown = sorted(set(cfg) - set(merged))
    if unknown:
        raise ConfigError(f"unknown scenario keys {unknown}", field="scenario")
    merged.update(cfg)

    _fraction(merged, "PENRATE")
    _fraction(merged, "branded_drop_at_generic", allow_one=False)
    _fraction(merged, "annual_tariff_decay", allow_one=False)
    fraction = _fraction(merged, "generic_price_fraction")
    if fraction <= 0.0:
        raise ConfigError("must be > 0", field="generic_price_fraction")
    lo, hi = GENERIC_PRICE_FRACTION_RANGE
    if not lo <= fraction <= hi:
        logger.warning(
            f"⚠️ generic_price_fraction {fraction} outside the observed range [{lo}, {hi}]"
        )
    population = _fraction(merged, "population_fraction")
    if population <= 0.0:
        raise ConfigError("must be > 0", field="population_fraction")

    for name in ("AMMGM_offset", "PENTIME_offset"):
        value = merged[name]
        if not isinstance(value, int | float) or isinstance(value, bool) or value < 0:
            raise ConfigError("must be a nonnegative number of years", field=name)
    for name, minimum in (("horizon", 1), ("incident_cases_per_step", 0), ("n_runs", 1)):
        value = merged[name]
        if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
            raise ConfigError(f"must be an integer >= {minimum}", field=name)
    if merged["horizon"] != HORIZON_PERIODS:
        horizon = merged["horizon"]
        logger.warning(f"⚠️ horizon {horizon} differs from {HORIZON_PERIODS} periods")
    if not isinstance(merged["PENTIME_overrides"], dict):
        raise ConfigError("must map treatment ids to dates", field="PENTIME_overrides")
    for name in ("counterfactual_branded_drop", "invert_ir_rule", "record_trajectories"):
        if not isinstance(merged[name], bool):
            raise ConfigError("must be true or false", field=name)
    return ScenarioConfig(**merged)  # type: ignore[typeddict-item]


# =============================================================================
# Run results
# =============================================================================


@dataclass(frozen=True)
class TrajectoryStep:
    """Treatment status of one patient at one period."""

    patient: int
    period: int
    treatment_id: str
    on_generic: bool
    alive: bool


@dataclass
class RunResult:
    """Per-patient cost indicators and cohort aggregates of one simulation run."""

    dc: NDArray[np.float64]
    fd: NDArray[np.int64]
    cost_b: NDArray[np.float64]
    cost_g: NDArray[np.float64]
    total_dc_scaled: float
    generic_uptake_by_period: NDArray[np.float64]
    ever_generic: NDArray[np.bool_]
    trajectories: list[TrajectoryStep] = field(default_factory=list, repr=False)

    @property
    def ndc(self) -> NDArray[np.float64]:
        return self.dc / np.maximum(self.fd, 1)

    @property
    def n_patients(self) -> int:
        return int(self.dc.size)

    @property
    def mean_ndc(self) -> float:
        return float(self.ndc.mean()) if self.n_patients else 0.0

    @property
    def ever_generic_proportion(self) -> float:
        return float(self.ever_generic.mean()) if self.n_patients else 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "n_patients": self.n_patients,
            "total_dc": float(self.dc.sum()),
            "total_dc_scaled": self.total_dc_scaled,
            "mean_ndc": self.mean_ndc,
            "ever_generic_proportion": self.ever_generic_proportion,
            "generic_uptake_by_period": self.generic_uptake_by_period.tolist(),
        }
