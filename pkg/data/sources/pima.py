"""
Synthetic Pima-style diabetes dataset.

Eight covariates of mixed type plus a binary outcome. Glucose, BMI and blood
pressure drive the outcome; pregnancy is independent of everything else.
"""

import logging

import numpy as np
import pandas as pd

from core.stats import mvn_sample
from data.discretizers import BMI_DISCRETIZER, discretize_many
from data.models.dataset import ColumnSchema, MixedDataset, categorical, continuous
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

OUTCOME = "Diabetes"
STRONG_COVARIATE = "Glucose"
NULL_COVARIATE = "Pregnant"

# Loadings of the latent covariates (Glucose, BloodPressure, SkinThickness,
# Insulin, Pedigree, Age, BMI) on a metabolic and an age factor
_LOADINGS = np.array(
    [
        [0.60, 0.25],
        [0.30, 0.50],
        [0.65, 0.00],
        [0.60, 0.00],
        [0.20, 0.00],
        [0.10, 0.70],
        [0.75, 0.10],
    ]
)


def latent_correlation() -> np.ndarray:
    common = _LOADINGS @ _LOADINGS.T
    return common + np.diag(1.0 - np.diag(common))


def pima_schema() -> list[ColumnSchema]:
    return [
        categorical("Pregnant", ["No", "Yes"]),
        categorical("BMI", list(BMI_DISCRETIZER.output_labels)),
        continuous("Glucose"),
        continuous("BloodPressure"),
        continuous("SkinThickness"),
        continuous("Insulin"),
        continuous("Pedigree"),
        continuous("Age"),
        categorical(OUTCOME, ["No", "Yes"]),
    ]


def make_pima_like(n: int = 392, seed: int = 0) -> MixedDataset:
    """
    Draw ``n`` synthetic patients.

    Args:
        n: Number of rows (392 matches the complete-case subset size)
        seed: Integer seed

    Returns:
        MixedDataset with the schema of ``pima_schema()``
    """
    rng = make_rng(seed)
    z = mvn_sample(np.zeros(7), latent_correlation(), n, rng)

    glucose = np.clip(122.0 + 30.0 * z[:, 0], 56.0, 199.0)
    pressure = np.clip(71.0 + 12.0 * z[:, 1], 24.0, 110.0)
    skin = np.clip(29.0 + 10.0 * z[:, 2], 7.0, 63.0)
    insulin = np.exp(4.8 + 0.6 * z[:, 3])
    pedigree = np.exp(-0.85 + 0.6 * z[:, 4])
    age = 21.0 + np.round(np.exp(2.1 + 0.75 * (z[:, 5] + 0.5 * np.abs(z[:, 5]))), 0)
    bmi = np.clip(33.0 + 6.5 * z[:, 6], 18.0, 67.0)

    eta = (
        -0.9
        + 0.035 * (glucose - 122.0)
        + 0.10 * (bmi - 33.0)
        + 0.045 * (pressure - 71.0)
        + 0.6 * (pedigree - 0.47)
    )
    diabetes = rng.random(n) < 1.0 / (1.0 + np.exp(-eta))
    pregnant = rng.random(n) < 0.65

    frame = pd.DataFrame(
        {
            "Pregnant": np.where(pregnant, "Yes", "No"),
            "BMI": discretize_many(bmi, BMI_DISCRETIZER),
            "Glucose": np.round(glucose, 0),
            "BloodPressure": np.round(pressure, 0),
            "SkinThickness": np.round(skin, 0),
            "Insulin": np.round(insulin, 0),
            "Pedigree": np.round(pedigree, 3),
            "Age": age,
            OUTCOME: np.where(diabetes, "Yes", "No"),
        }
    )
    logger.info(f"✅ Generated {n} Pima-style rows ({int(diabetes.sum())} with diabetes)")
    return MixedDataset(pima_schema(), frame)
