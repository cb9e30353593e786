"""
Configuration settings for the cohort simulation engine.
"""

from typing import Any

# Environment variable controlling log verbosity
LOG_ENV_VAR = "COHORTSIM_LOG"
DEFAULT_LOG_LEVEL = "WARNING"

# Pinned random generator, recorded in every output file
RNG_NAME = "numpy.PCG64"

# CLI exit codes
EXIT_OK = 0
EXIT_UNEXPECTED_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4

# =============================================================================
# Numerical tolerances
# =============================================================================

SYMMETRY_TOL = 1e-12
PSD_PIVOT_TOL = -1e-10
PROBABILITY_SUM_TOL = 1e-12
QUANTILE_TOL = 1e-12

# h-function outputs are kept inside [H_CLAMP, 1 - H_CLAMP]
H_CLAMP = 1e-12
# uniforms fed to copula formulas are kept inside (U_EPS, 1 - U_EPS)
U_EPS = 1e-12

# Pair-copula parameter bounds
GAUSSIAN_RHO_MAX = 0.9999
CLAYTON_THETA_MAX = 50.0
GUMBEL_THETA_MAX = 50.0
FRANK_THETA_MAX = 50.0
MIN_PAIR_OBSERVATIONS = 20
MIN_VINE_OBSERVATIONS = 30

# Ridge added to singular covariance estimates: RIDGE_FACTOR * trace / K
RIDGE_FACTOR = 1e-8

# Multinomial logit
LOGIT_COEF_CAP = 30.0
LOGIT_MAX_ITER = 100
LOGIT_GRAD_TOL = 1e-9
LOGIT_ROWS_PER_COVARIATE = 10

# =============================================================================
# Case study defaults (generic switch scenario)
# =============================================================================

MONTHS_PER_PERIOD = 6
PERIODS_PER_YEAR = 2
HORIZON_PERIODS = 10
DEFAULT_INCIDENT_CASES = 455
DEFAULT_POPULATION_FRACTION = 0.228
DEFAULT_GENERIC_PRICE_FRACTION = 0.40
GENERIC_PRICE_FRACTION_RANGE = (0.30, 0.50)
DEFAULT_BRANDED_DROP = 0.20
DEFAULT_ANNUAL_TARIFF_DECAY = 0.034
DEFAULT_AMMGM_OFFSET_YEARS = 13
DEFAULT_PENTIME_OFFSET_YEARS = 1
DEFAULT_N_RUNS = 100
DEFAULT_RARE_TRANSITION_THRESHOLD = 100
PENETRATION_RATES = [0.10, 0.25, 0.40, 0.55, 0.70]

# Prediction interval levels -> (lower, upper) quantile fractions
PREDICTION_LEVELS: dict[float, tuple[float, float]] = {
    0.80: (0.10, 0.90),
    0.90: (0.05, 0.95),
}
MIN_INTERVAL_VALUES = 20

# Covariate lists used by the covariate-dependent chains
ARN_CANDIDATES = [
    "ARN_prev",
    "IR",
    "CONTA",
    "HEART",
    "VIHS",
    "AGE",
    "SEX",
    "VIHD",
    "TREATD",
]
CREA_CANDIDATES = [
    "CREA_prev",
    "SEX",
    "ARN",
    "AGE",
    "HEART",
    "TREATD",
    "VIHS",
    "VIHD",
]
SWITCH_CANDIDATES = ["TREATD", "ARN", "VIHS"]

# Constant chains driven by the period step
CONSTANT_CHAINS = ["HEART", "DIAB", "VIHS", "DEATH"]

# =============================================================================
# Virtual outcome experiment defaults
# =============================================================================

DEFAULT_N_DATASETS = 100
DEFAULT_N_ROWS = 500
EXPECTED_COUNT_WARNING = 5

GENERATOR_KINDS = ["discrete", "continuous", "vine"]
CLASSIFIER_KINDS = ["logistic", "bagged_trees"]

# Sections a run config may carry besides the common keys, per command
COMMON_SECTIONS = ["command", "seed", "threads", "output", "rng"]
COMMAND_SECTIONS: dict[str, list[str]] = {
    "fit": ["data", "generator", "execution", "outcome"],
    "generate": ["model", "n"],
    "simulate": ["synthetic", "baseline", "catalog", "models", "scenario", "sweep"],
    "analyze": ["original", "simulated", "experiment", "fidelity_threshold"],
}

DEFAULT_THREADS = 1

OUTPUT_FILES: dict[str, Any] = {
    "model": "model.json",
    "execution": "execution_models.json",
    "outcome": "outcome.json",
    "cohort": "cohort.csv",
    "runs": "runs.json",
    "patients": "patients_ndc.csv",
    "sweep_index": "sweep.json",
    "fidelity": "fidelity.json",
    "pvalues_json": "pvalues.json",
    "pvalues_csv": "pvalues.csv",
}
