"""
Markov execution models.

``ConstantMarkovModel`` holds a row-stochastic matrix estimated by transition
counting. ``CovariateMarkovModel`` links transition probabilities to covariates
through a multinomial logit with the reference state's linear predictor fixed
at 0; its fitting lives in ``execution.logit``.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy import special

from config.settings import PROBABILITY_SUM_TOL
from utils.errors import DomainError, ShapeError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)


# =============================================================================
# Constant transition matrices
# =============================================================================


@dataclass(frozen=True)
class ConstantMarkovModel:
    states: tuple[str, ...]
    matrix: NDArray[np.float64]
    counts: NDArray[np.int64] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        k = len(self.states)
        if m.shape != (k, k):
            raise ShapeError(f"Transition matrix must be {k}x{k}, got {m.shape}")
        if np.any(m < 0.0) or np.any(np.abs(m.sum(axis=1) - 1.0) > PROBABILITY_SUM_TOL):
            raise DomainError("Transition matrix rows must be nonnegative and sum to 1")
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "matrix", m)

    def index(self, state: str) -> int:
        try:
            return self.states.index(str(state))
        except ValueError:
            raise DomainError(f"Unknown state '{state}' (states: {list(self.states)})") from None

    def row(self, state: str) -> NDArray[np.float64]:
        return self.matrix[self.index(state)]

    @classmethod
    def identity(cls, states: Sequence[str]) -> "ConstantMarkovModel":
        return cls(tuple(states), np.eye(len(states)))


def fit_constant_markov(
    sequences: Sequence[Sequence[Any]], states: Sequence[Any] | None = None
) -> ConstantMarkovModel:
    """
    Estimate a transition matrix from per-subject state sequences.

    matrix[s][t] = count(s -> t) / count(s -> .); states never observed as a
    source get a self-loop of probability 1.

    Args:
        sequences: One state-label sequence per subject
        states: Declared state order; defaults to sorted observed labels
    """
    seqs = [[str(s) for s in seq] for seq in sequences]
    if not seqs or all(len(seq) == 0 for seq in seqs):
        raise ShapeError("fit_constant_markov needs at least one non-empty sequence")

    observed = sorted({s for seq in seqs for s in seq})
    labels = [str(s) for s in states] if states is not None else observed
    unknown = sorted(set(observed) - set(labels))
    if unknown:
        raise DomainError(f"Sequences contain undeclared states {unknown}")

    position = {s: i for i, s in enumerate(labels)}
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    for seq in seqs:
        for a, b in zip(seq, seq[1:], strict=False):
            counts[position[a], position[b]] += 1
    if counts.sum() == 0:
        raise ShapeError("fit_constant_markov needs at least one observed transition")

    totals = counts.sum(axis=1)
    matrix = np.zeros((k, k))
    for i in range(k):
        if totals[i] == 0:
            matrix[i, i] = 1.0
        else:
            matrix[i] = counts[i] / totals[i]
    return ConstantMarkovModel(tuple(labels), matrix, counts)


def draw_from_row(row: NDArray[np.float64], uniform: float | NDArray[np.float64]):
    """Index of the state selected by a uniform draw in [0, 1) (inverse CDF)."""
    cum = np.cumsum(row)
    cum[-1] = 1.0
    index = np.searchsorted(cum, uniform, side="right")
    return np.minimum(index, len(row) - 1)


def step_markov(
    model: ConstantMarkovModel, current: str, seed: int | np.random.Generator
) -> str:
    """Next state drawn from the current state's row."""
    row = model.row(current)
    rng = make_rng(seed)
    return model.states[int(draw_from_row(row, rng.random()))]


# =============================================================================
# Covariate-dependent transitions (multinomial logit)
# =============================================================================


@dataclass(frozen=True)
class CovariateMarkovModel:
    """
    Multinomial-logit transition model.

    ``coefficients`` has one row per non-reference state (in ``states`` order) and
    one column per design term; the first term is the intercept. Categorical
    covariates enter as indicator terms ``"NAME=label"`` against their first level.
    """

    states: tuple[str, ...]
    reference_state: str
    covariates: tuple[str, ...]
    terms: tuple[str, ...]
    coefficients: NDArray[np.float64]
    levels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    loglik: float = 0.0
    aic: float = 0.0
    n_obs: int = 0
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        coef = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if self.reference_state not in self.states:
            raise DomainError(f"Reference state '{self.reference_state}' not in {self.states}")
        if coef.shape != (len(self.states) - 1, len(self.terms)):
            raise ShapeError(
                f"Coefficients must be {len(self.states) - 1}x{len(self.terms)}, got {coef.shape}"
            )
        object.__setattr__(self, "coefficients", coef)

    def design_row(self, covariates: Mapping[str, Any]) -> NDArray[np.float64]:
        """Design vector (intercept first) for one covariate vector."""
        missing = [name for name in self.covariates if name not in covariates]
        if missing:
            raise DomainError(f"Missing covariate(s) {missing}")
        row = [1.0]
        for term in self.terms[1:]:
            name, _, label = term.partition("=")
            value = covariates[name]
            if label:
                row.append(1.0 if str(value) == label else 0.0)
            else:
                x = float(value)
                if not math.isfinite(x):
                    raise DomainError(f"Covariate '{name}' is not finite")
                row.append(x)
        return np.asarray(row)


def softmax_with_reference(eta: NDArray[np.float64]) -> NDArray[np.float64]:
    """Softmax over (0, eta_1, ..., eta_J) along the last axis."""
    eta = np.asarray(eta, dtype=float)
    zeros = np.zeros(eta.shape[:-1] + (1,))
    return special.softmax(np.concatenate([zeros, eta], axis=-1), axis=-1)


def transition_probs(
    model: CovariateMarkovModel, covariates: Mapping[str, Any]
) -> NDArray[np.float64]:
    """Probabilities over ``model.states`` for one covariate vector."""
    x = model.design_row(covariates)
    probs = softmax_with_reference(model.coefficients @ x)
    ordered = np.empty(len(model.states))
    ref = model.states.index(model.reference_state)
    ordered[ref] = probs[0]
    others = [i for i in range(len(model.states)) if i != ref]
    ordered[others] = probs[1:]
    return ordered


def design_matrix(
    model: CovariateMarkovModel, columns: Mapping[str, Any], n: int
) -> NDArray[np.float64]:
    """n x len(terms) design for covariate columns given as arrays."""
    missing = [name for name in model.covariates if name not in columns]
    if missing:
        raise DomainError(f"Missing covariate(s) {missing}")
    x = np.ones((n, len(model.terms)))
    for j, term in enumerate(model.terms[1:], start=1):
        name, _, label = term.partition("=")
        values = np.asarray(columns[name])
        if label:
            x[:, j] = (values.astype(str) == label).astype(float)
        else:
            x[:, j] = values.astype(float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Covariates must be finite")
    return x


def transition_probs_many(
    model: CovariateMarkovModel, columns: Mapping[str, Any], n: int
) -> NDArray[np.float64]:
    """Row-wise transition probabilities (n x len(states))."""
    x = design_matrix(model, columns, n)
    probs = softmax_with_reference(x @ model.coefficients.T)
    ref = model.states.index(model.reference_state)
    others = [i for i in range(len(model.states)) if i != ref]
    ordered = np.empty((n, len(model.states)))
    ordered[:, ref] = probs[:, 0]
    ordered[:, others] = probs[:, 1:]
    return ordered
