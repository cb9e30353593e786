"""
Outcome generators: a classifier that predicts an outcome from covariates, plus
confusion-matrix noise so that the generator simulates outcomes with the
classifier's empirical error profile instead of returning bare predictions.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from sklearn.compose import ColumnTransformer
from sklearn.ensemble import BaggingClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import OneHotEncoder, StandardScaler
from sklearn.tree import DecisionTreeClassifier

from data.models.dataset import MixedDataset
from utils.errors import DataError, DomainError, ShapeError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

ClassifierKind = Literal["logistic", "bagged_trees"]


# =============================================================================
# Classifiers
# =============================================================================


@dataclass
class OutcomeClassifier:
    """Fitted scikit-learn pipeline mapping covariates to an outcome label."""

    kind: ClassifierKind
    outcome: str
    covariates: list[str]
    categorical: list[str]
    labels: tuple[str, ...]
    pipeline: Pipeline = field(repr=False)

    def _frame(self, rows: pd.DataFrame) -> pd.DataFrame:
        missing = [c for c in self.covariates if c not in rows.columns]
        if missing:
            raise DomainError(f"Missing covariate(s) {missing}")
        frame = rows[self.covariates].copy()
        for name in self.covariates:
            if name in self.categorical:
                frame[name] = frame[name].astype(str)
            else:
                frame[name] = frame[name].astype(float)
        return frame

    def predict(self, data: MixedDataset | pd.DataFrame) -> NDArray[np.str_]:
        rows = data.frame if isinstance(data, MixedDataset) else data
        if len(rows) == 0:
            return np.array([], dtype=str)
        return np.asarray(self.pipeline.predict(self._frame(rows)), dtype=str)

    def predict_one(self, patient: Mapping[str, Any]) -> str:
        return str(self.predict(pd.DataFrame([dict(patient)]))[0])


def fit_outcome_classifier(
    data: MixedDataset,
    outcome: str,
    covariates: list[str] | None = None,
    kind: ClassifierKind = "logistic",
    seed: int = 0,
) -> OutcomeClassifier:
    """
    Fit a regularized logistic classifier or a bagged decision-tree ensemble.

    Categorical covariates are one-hot encoded, continuous ones standardized.
    """
    target = data.column_schema(outcome)
    if not target.is_categorical:
        raise DomainError(f"Outcome '{outcome}' must be categorical")
    names = covariates if covariates is not None else [n for n in data.names if n != outcome]
    categorical = [n for n in names if data.column_schema(n).is_categorical]
    continuous = [n for n in names if n not in categorical]

    transformers = []
    if categorical:
        transformers.append(("categorical", OneHotEncoder(handle_unknown="ignore"), categorical))
    if continuous:
        transformers.append(("continuous", StandardScaler(), continuous))
    if kind == "logistic":
        estimator = LogisticRegression(C=1.0, max_iter=1000)
    elif kind == "bagged_trees":
        estimator = BaggingClassifier(
            DecisionTreeClassifier(max_depth=6, min_samples_leaf=5),
            n_estimators=50,
            random_state=int(seed) % (2**32),
        )
    else:
        raise DomainError(f"Unknown classifier kind '{kind}'")

    pipeline = Pipeline(
        [("preprocess", ColumnTransformer(transformers)), ("classifier", estimator)]
    )
    classifier = OutcomeClassifier(kind, outcome, names, categorical, target.categories, pipeline)
    pipeline.fit(classifier._frame(data.frame), data.labels(outcome))
    logger.info(f"✅ {kind} classifier fitted for '{outcome}' on {len(names)} covariates")
    return classifier


# =============================================================================
# Confusion matrix
# =============================================================================


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed (true label, predicted label)."""

    labels: tuple[str, ...]
    counts: NDArray[np.int64]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        k = len(self.labels)
        if counts.shape != (k, k):
            raise ShapeError(f"Confusion counts must be {k}x{k}, got {counts.shape}")
        if np.any(counts < 0):
            raise DomainError("Confusion counts must be nonnegative")
        object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))
        object.__setattr__(self, "counts", counts.astype(np.int64))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise DomainError(f"Unknown outcome label '{label}'") from None

    def column(self, predicted: str) -> NDArray[np.int64]:
        return self.counts[:, self.index(predicted)]

    @property
    def error_rate(self) -> float:
        total = self.counts.sum()
        return float(1.0 - np.trace(self.counts) / total) if total else 0.0

    @classmethod
    def identity(cls, labels: tuple[str, ...], weight: int = 1) -> "ConfusionMatrix":
        return cls(labels, np.eye(len(labels), dtype=np.int64) * weight)


def confusion_matrix(
    classifier: OutcomeClassifier, eval_data: MixedDataset, outcome_column: str
) -> ConfusionMatrix:
    """Tally (true, predicted) pairs of the classifier over eval_data."""
    labels = eval_data.column_schema(outcome_column).categories
    truth = eval_data.labels(outcome_column)
    predicted = classifier.predict(eval_data)
    unknown = sorted(set(predicted) - set(labels))
    if unknown:
        raise DataError(f"Classifier emitted labels {unknown} absent from '{outcome_column}'")
    position = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(counts, ([position[t] for t in truth], [position[p] for p in predicted]), 1)
    return ConfusionMatrix(labels, counts)


# =============================================================================
# Outcome simulation
# =============================================================================


@dataclass(frozen=True)
class OutcomeGenerator:
    classifier: OutcomeClassifier
    noise: ConfusionMatrix
    noise_enabled: bool = True

    def with_noise(self, enabled: bool) -> "OutcomeGenerator":
        return OutcomeGenerator(self.classifier, self.noise, enabled)


def build_outcome_generator(
    data: MixedDataset,
    outcome: str,
    covariates: list[str] | None = None,
    kind: ClassifierKind = "logistic",
    seed: int = 0,
    noise_enabled: bool = True,
) -> OutcomeGenerator:
    """Fit the classifier and its confusion matrix on the same source data."""
    classifier = fit_outcome_classifier(data, outcome, covariates, kind, seed)
    noise = confusion_matrix(classifier, data, outcome)
    logger.info(f"📋 '{outcome}' classifier error rate on source data: {noise.error_rate:.3f}")
    return OutcomeGenerator(classifier, noise, noise_enabled)


def _noisy_labels(
    noise: ConfusionMatrix, predicted: NDArray[np.str_], uniforms: NDArray[np.float64]
) -> tuple[NDArray[np.str_], list[str]]:
    """Replace each prediction by a label drawn from its confusion column."""
    result = predicted.astype(object)
    diagnostics: list[str] = []
    for label in noise.labels:
        rows = np.flatnonzero(predicted == label)
        if rows.size == 0:
            continue
        column = noise.column(label).astype(float)
        if column.sum() == 0:
            message = f"confusion column for predicted '{label}' is empty; prediction kept"
            diagnostics.append(message)
            logger.warning(f"⚠️ {message}")
            continue
        cum = np.cumsum(column / column.sum())
        cum[-1] = 1.0
        drawn = np.minimum(np.searchsorted(cum, uniforms[rows], side="right"), len(cum) - 1)
        result[rows] = np.asarray(noise.labels, dtype=object)[drawn]
    return result.astype(str), diagnostics


def simulate_outcome(
    gen: OutcomeGenerator, patient: Mapping[str, Any], seed: int | np.random.Generator
) -> str:
    """Simulated outcome label for one patient."""
    predicted = gen.classifier.predict_one(patient)
    if not gen.noise_enabled:
        return predicted
    rng = make_rng(seed)
    labels, _ = _noisy_labels(gen.noise, np.array([predicted]), rng.random(1))
    return str(labels[0])


def simulate_outcomes(
    gen: OutcomeGenerator,
    data: MixedDataset,
    seed: int | np.random.Generator,
    uniforms: NDArray[np.float64] | None = None,
) -> tuple[NDArray[np.str_], list[str]]:
    """Simulated outcome labels for every row of ``data`` plus diagnostics."""
    predicted = gen.classifier.predict(data)
    if not gen.noise_enabled:
        return predicted, []
    draws = uniforms if uniforms is not None else make_rng(seed).random(data.n)
    return _noisy_labels(gen.noise, predicted, draws)


# =============================================================================
# Treatment effects
# =============================================================================


@dataclass(frozen=True)
class PairedOutcomes:
    """Per-patient outcomes under exposure (y1) and no exposure (y0)."""

    y1: NDArray[np.float64]
    y0: NDArray[np.float64]

    def __post_init__(self) -> None:
        y1 = np.asarray(self.y1, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if y1.shape != y0.shape or y1.ndim != 1:
            raise ShapeError("Both arms need one outcome per patient")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)

    @property
    def n(self) -> int:
        return int(self.y1.size)


def ate_paired(p: PairedOutcomes) -> float:
    """Mean of the per-patient differences Y(1) - Y(0)."""
    if p.n < 1:
        raise ShapeError("ate_paired needs at least one patient")
    return float(np.mean(p.y1 - p.y0))


def ate_two_sample(y_a: ArrayLike, y_b: ArrayLike) -> float:
    """Difference of arm means, for arms observed on different patients."""
    a = np.asarray(y_a, dtype=float)
    b = np.asarray(y_b, dtype=float)
    if a.size < 1 or b.size < 1:
        raise ShapeError("ate_two_sample needs both arms non-empty")
    return float(a.mean() - b.mean())


def simulate_paired_outcomes(
    gen: OutcomeGenerator,
    data: MixedDataset,
    exposure: str,
    exposed_label: str,
    unexposed_label: str,
    positive_label: str,
    seed: int | np.random.Generator,
) -> PairedOutcomes:
    """
    Simulate every patient under both exposure levels.

    Both arms reuse the same uniform draw per patient, so the arms differ only
    through the exposure covariate.
    """
    col = data.column_schema(exposure)
    for label in (exposed_label, unexposed_label):
        if label not in col.categories:
            raise DomainError(f"'{label}' is not a category of '{exposure}'")
    uniforms = make_rng(seed).random(data.n)
    arms = []
    for label in (exposed_label, unexposed_label):
        frame = data.frame.copy()
        frame[exposure] = label
        outcomes, _ = simulate_outcomes(gen, MixedDataset(data.schema, frame), seed, uniforms)
        arms.append((outcomes == str(positive_label)).astype(float))
    return PairedOutcomes(arms[0], arms[1])
