"""
Generic-switch scenario engine: tariffs, the four period steps, repeated runs
and prediction intervals.
"""

from scenario.catalog import TreatmentCatalog, load_catalog, save_catalog
from scenario.engine import check_rule4, run_simulation, run_sweep, sweep_points
from scenario.intervals import prediction_intervals, summarize_runs
from scenario.pricing import prob_conv, price_at
from scenario.steps import (
    Cohort,
    step1_update_covariates,
    step2_update_treatment,
    step3_update_cohort,
    step4_period_costs,
)

__all__ = [
    "Cohort",
    "TreatmentCatalog",
    "check_rule4",
    "load_catalog",
    "prediction_intervals",
    "price_at",
    "prob_conv",
    "run_simulation",
    "run_sweep",
    "save_catalog",
    "step1_update_covariates",
    "step2_update_treatment",
    "step3_update_cohort",
    "step4_period_costs",
    "summarize_runs",
    "sweep_points",
]
