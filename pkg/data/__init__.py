"""
Data package for cohort simulation.

## Architecture:
- **models**: Type definitions (mixed datasets, scenario config, reports, pipeline state)
- **loaders**: CSV ingestion and export (no processing)
- **discretizers**: Threshold rules turning measurements into classes
- **sources**: Synthetic data (Pima-style dataset, case-study calibration data)
- **analytics**: Fidelity reports and the replicated p-value experiment
- **pipeline**: Staged command flow (validate -> load -> run -> write)

``analytics`` and ``pipeline`` depend on the generator and execution packages
and are imported from their modules directly.
"""

# =============================================================================
# Loading and discretization
# =============================================================================

from .discretizers import (
    ARN_DISCRETIZER,
    BMI_DISCRETIZER,
    CREA_DISCRETIZER,
    discretize,
    discretize_many,
)
from .loaders import load_csv, load_histories, write_csv

# =============================================================================
# Type Definitions
# =============================================================================
from .models import ColumnSchema, MixedDataset, ThresholdDiscretizer, categorical, continuous

# =============================================================================
# Synthetic sources
# =============================================================================
from .sources import (
    make_hiv_baseline,
    make_hiv_histories,
    make_pima_like,
    make_treatment_catalog,
    pima_schema,
)

__all__ = [
    # Loading
    "load_csv",
    "load_histories",
    "write_csv",
    # Discretization
    "ARN_DISCRETIZER",
    "BMI_DISCRETIZER",
    "CREA_DISCRETIZER",
    "discretize",
    "discretize_many",
    # Types
    "ColumnSchema",
    "MixedDataset",
    "ThresholdDiscretizer",
    "categorical",
    "continuous",
    # Sources
    "make_hiv_baseline",
    "make_hiv_histories",
    "make_pima_like",
    "make_treatment_catalog",
    "pima_schema",
]
