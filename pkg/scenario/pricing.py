"""
Generic conversion probability and tariff paths.

Tariffs stay at MEDCOSTB until the generic is marketed (AMMGM). From AMMGM on,
the generic costs ``generic_price_fraction`` of the branded tariff, the branded
tariff drops by ``branded_drop_at_generic`` and both decay by
``annual_tariff_decay`` per year, compounded per period. A scenario with
PENRATE = 0 never markets the generic, so its tariffs keep the pre-generic path.
"""

from typing import Literal

from config.settings import DEFAULT_AMMGM_OFFSET_YEARS, DEFAULT_PENTIME_OFFSET_YEARS
from data.models.scenario import ScenarioConfig, TreatmentEntry
from utils.errors import ConfigError, DomainError

Arm = Literal["branded", "generic", "counterfactual"]


def ammgm(treatment: TreatmentEntry, cfg: ScenarioConfig) -> float:
    """Generic marketing date: explicit AMMGM, else AMMT + AMMGM_offset."""
    if "AMMGM" in treatment:
        return float(treatment["AMMGM"])
    return float(treatment["AMMT"]) + float(cfg.get("AMMGM_offset", DEFAULT_AMMGM_OFFSET_YEARS))


def pentime(treatment: TreatmentEntry, cfg: ScenarioConfig) -> float:
    """Date at which the conversion probability reaches PENRATE."""
    overrides = cfg.get("PENTIME_overrides", {})
    start = ammgm(treatment, cfg)
    if treatment.get("treatment_id") in overrides:
        value = float(overrides[treatment["treatment_id"]])
    else:
        value = start + float(cfg.get("PENTIME_offset", DEFAULT_PENTIME_OFFSET_YEARS))
    if value < start:
        raise ConfigError(
            f"PENTIME {value} precedes AMMGM {start} for '{treatment.get('treatment_id')}'",
            field="PENTIME_overrides",
        )
    return value


def generic_marketed(treatment: TreatmentEntry, cfg: ScenarioConfig) -> bool:
    return bool(treatment.get("has_generic", False)) and float(cfg.get("PENRATE", 0.0)) > 0.0


def prob_conv(t: float, treatment: TreatmentEntry, cfg: ScenarioConfig) -> float:
    """
    Probability of converting to the generic at date t.

    0 before AMMGM, linear ramp PENRATE * (t - AMMGM) / (PENTIME - AMMGM) up to
    PENTIME, PENRATE from PENTIME on. PENTIME = AMMGM gives a step at AMMGM.
    """
    if not treatment.get("has_generic", False):
        return 0.0
    penrate = float(cfg.get("PENRATE", 0.0))
    start, end = ammgm(treatment, cfg), pentime(treatment, cfg)
    if t < start:
        return 0.0
    if t >= end:
        return penrate
    return penrate * (t - start) / (end - start)


def _decay(t: float, start: float, cfg: ScenarioConfig) -> float:
    return (1.0 - float(cfg["annual_tariff_decay"])) ** (t - start)


def price_at(t: float, treatment: TreatmentEntry, arm: Arm, cfg: ScenarioConfig) -> float:
    """
    Tariff per period at date t.

    ``branded`` and ``generic`` are the scenario-arm tariffs; ``counterfactual``
    is the branded tariff of the no-switch arm, which keeps the pre-generic
    tariff unless ``counterfactual_branded_drop`` is set.

    Raises:
        DomainError: generic tariff requested before AMMGM or for a treatment
            without a generic
    """
    base = float(treatment["MEDCOSTB"])
    start = ammgm(treatment, cfg)
    if arm == "generic":
        if not treatment.get("has_generic", False):
            raise DomainError(f"Treatment '{treatment.get('treatment_id')}' has no generic")
        if t < start:
            raise DomainError(f"Generic tariff requested at {t} before AMMGM {start}")
        return float(cfg["generic_price_fraction"]) * base * _decay(t, start, cfg)
    if arm == "counterfactual" and not cfg.get("counterfactual_branded_drop", False):
        return base
    if arm not in ("branded", "counterfactual"):
        raise DomainError(f"Unknown arm '{arm}'")
    if not generic_marketed(treatment, cfg) or t < start:
        return base
    return base * (1.0 - float(cfg["branded_drop_at_generic"])) * _decay(t, start, cfg)
