"""
Synthetic data sources: a Pima-style diabetes dataset and the calibration data
of the generic-switch case study.
"""

from .hiv import make_hiv_baseline, make_hiv_histories, make_treatment_catalog
from .pima import make_pima_like, pima_schema

__all__ = [
    "make_hiv_baseline",
    "make_hiv_histories",
    "make_pima_like",
    "make_treatment_catalog",
    "pima_schema",
]
