"""
Multinomial-logit calibration of covariate Markov models.

Log-likelihood, score and Hessian come from ``statsmodels`` ``MNLogit``; the
Newton iterations are run here so coefficients can be capped at
+/- LOGIT_COEF_CAP under separation. Covariates are selected by backward
stepwise elimination on AIC (BIC available).
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from statsmodels.discrete.discrete_model import MNLogit

from config.settings import (
    LOGIT_COEF_CAP,
    LOGIT_GRAD_TOL,
    LOGIT_MAX_ITER,
    LOGIT_ROWS_PER_COVARIATE,
)
from data.models.dataset import MixedDataset
from execution.markov import CovariateMarkovModel
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

Criterion = Literal["aic", "bic"]


@dataclass(frozen=True)
class LogitDesign:
    """Design matrix (intercept first) and response codes (0 = reference state)."""

    x: NDArray[np.float64]
    y: NDArray[np.int64]
    terms: tuple[str, ...]
    states: tuple[str, ...]
    reference_state: str
    levels: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.states)

    def mnlogit(self) -> MNLogit:
        return MNLogit(self.y, self.x)


# =============================================================================
# Design construction
# =============================================================================


def _observed_states(data: MixedDataset, target: str) -> tuple[list[str], list[str]]:
    col = data.column_schema(target)
    if not col.is_categorical:
        raise DomainError(f"Target '{target}' must be categorical")
    present = set(data.labels(target))
    observed = [label for label in col.categories if label in present]
    missing = [label for label in col.categories if label not in present]
    return observed, missing


def build_design(
    data: MixedDataset,
    target: str,
    covariates: Sequence[str],
    reference_state: str | None = None,
    terms: Sequence[str] | None = None,
) -> LogitDesign:
    """
    Build the design for ``target ~ covariates``.

    Categorical covariates expand into indicator terms against their first
    level. ``terms`` restricts the design to an explicit term list.
    """
    states, _ = _observed_states(data, target)
    if not states:
        raise ShapeError(f"No observations of '{target}'")
    reference = reference_state if reference_state is not None else states[0]
    if reference not in states:
        raise DomainError(f"Reference state '{reference}' is never observed")
    ordered = [reference] + [s for s in states if s != reference]
    code = {s: i for i, s in enumerate(ordered)}
    y = np.array([code[label] for label in data.labels(target)], dtype=np.int64)

    columns = [np.ones(data.n)]
    names = ["const"]
    levels: dict[str, tuple[str, ...]] = {}
    for name in covariates:
        col = data.column_schema(name)
        if col.is_categorical:
            levels[name] = col.categories
            labels = data.labels(name)
            for label in col.categories[1:]:
                columns.append((labels == label).astype(float))
                names.append(f"{name}={label}")
        else:
            columns.append(data.values(name))
            names.append(name)

    x = np.column_stack(columns)
    if terms is not None:
        index = [names.index(t) for t in terms]
        x, names = x[:, index], [names[i] for i in index]
    return LogitDesign(x, y, tuple(names), tuple(states), reference, levels)


def drop_collinear(design: LogitDesign) -> tuple[LogitDesign, list[str]]:
    """Greedily keep design columns that raise the rank; returns dropped terms."""
    keep = [0]
    dropped: list[str] = []
    for j in range(1, design.x.shape[1]):
        trial = keep + [j]
        if np.linalg.matrix_rank(design.x[:, trial]) == len(trial):
            keep.append(j)
        else:
            dropped.append(design.terms[j])
    reduced = LogitDesign(
        design.x[:, keep],
        design.y,
        tuple(design.terms[i] for i in keep),
        design.states,
        design.reference_state,
        design.levels,
    )
    return reduced, dropped


# =============================================================================
# Likelihood
# =============================================================================


def logit_loglik(design: LogitDesign, beta: NDArray[np.float64]) -> float:
    """Log-likelihood at ``beta`` with shape (n_classes - 1, n_terms)."""
    return float(design.mnlogit().loglike(np.asarray(beta, dtype=float).reshape(-1)))


def logit_score(design: LogitDesign, beta: NDArray[np.float64]) -> NDArray[np.float64]:
    """Gradient of ``logit_loglik`` with the same shape as ``beta``."""
    b = np.asarray(beta, dtype=float)
    return design.mnlogit().score(b.reshape(-1)).reshape(b.shape)


@dataclass(frozen=True)
class NewtonResult:
    beta: NDArray[np.float64]
    loglik: float
    iterations: int
    converged: bool
    capped: bool


def newton_fit(design: LogitDesign) -> NewtonResult:
    """Maximize the log-likelihood by Newton steps with step halving and coefficient caps."""
    j, k = design.n_classes - 1, design.x.shape[1]
    if j == 0:
        return NewtonResult(np.zeros((0, k)), 0.0, 0, True, False)

    model = design.mnlogit()
    beta = np.zeros(j * k)
    loglik = float(model.loglike(beta))
    converged = False
    iteration = 0
    for iteration in range(1, LOGIT_MAX_ITER + 1):
        score = model.score(beta)
        if np.max(np.abs(score)) < LOGIT_GRAD_TOL:
            converged = True
            break
        hessian = model.hessian(beta)
        try:
            step = np.linalg.solve(-hessian, score)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(-hessian) @ score

        scale = 1.0
        while True:
            candidate = np.clip(beta + scale * step, -LOGIT_COEF_CAP, LOGIT_COEF_CAP)
            candidate_ll = float(model.loglike(candidate))
            if np.isfinite(candidate_ll) and candidate_ll >= loglik - 1e-12:
                break
            scale /= 2.0
            if scale < 1e-10:
                candidate, candidate_ll = beta, loglik
                break

        improvement = candidate_ll - loglik
        moved = float(np.max(np.abs(candidate - beta)))
        beta, loglik = candidate, candidate_ll
        if improvement < 1e-13 and moved < 1e-12:
            converged = bool(np.max(np.abs(model.score(beta))) < LOGIT_GRAD_TOL)
            break

    capped = bool(np.any(np.abs(beta) >= LOGIT_COEF_CAP - 1e-9))
    return NewtonResult(beta.reshape(j, k), loglik, iteration, converged, capped)


# =============================================================================
# Stepwise selection
# =============================================================================


def _criterion(loglik: float, n_params: int, n_obs: int, criterion: Criterion) -> float:
    penalty = 2.0 if criterion == "aic" else math.log(max(n_obs, 2))
    return penalty * n_params - 2.0 * loglik


@dataclass
class _Candidate:
    covariates: list[str]
    design: LogitDesign
    result: NewtonResult
    score: float
    dropped: list[str]


def _fit_covariates(
    data: MixedDataset,
    target: str,
    covariates: list[str],
    reference_state: str | None,
    criterion: Criterion,
) -> _Candidate:
    design, dropped = drop_collinear(build_design(data, target, covariates, reference_state))
    result = newton_fit(design)
    n_params = result.beta.size
    return _Candidate(
        covariates, design, result, _criterion(result.loglik, n_params, data.n, criterion), dropped
    )


def fit_multinomial_logit(
    data: MixedDataset,
    target: str,
    candidate_covariates: Sequence[str],
    reference_state: str | None = None,
    stepwise: bool = True,
    criterion: Criterion = "aic",
) -> CovariateMarkovModel:
    """
    Fit a multinomial logit of ``target`` on the candidate covariates.

    Backward stepwise: at each round the covariate whose removal lowers the
    criterion most is removed, until no removal lowers it.

    Raises:
        ShapeError: fewer than LOGIT_ROWS_PER_COVARIATE rows per candidate covariate
        DomainError: unknown column or non-categorical target
    """
    candidates = list(candidate_covariates)
    for name in [target, *candidates]:
        data.column_schema(name)
    if data.n < LOGIT_ROWS_PER_COVARIATE * max(len(candidates), 1):
        raise ShapeError(
            f"fit_multinomial_logit needs >= {LOGIT_ROWS_PER_COVARIATE} rows per covariate "
            f"({data.n} rows, {len(candidates)} covariates)"
        )

    diagnostics: list[str] = []
    _, unobserved = _observed_states(data, target)
    if unobserved:
        diagnostics.append(f"{target}: states {unobserved} never observed, excluded")

    best = _fit_covariates(data, target, candidates, reference_state, criterion)
    while stepwise and best.covariates:
        trials = [
            _fit_covariates(
                data, target, [c for c in best.covariates if c != name], reference_state, criterion
            )
            for name in best.covariates
        ]
        challenger = min(trials, key=lambda t: t.score)
        if challenger.score >= best.score:
            break
        removed = next(c for c in best.covariates if c not in challenger.covariates)
        logger.debug(f"{target}: removed '{removed}' ({criterion} {challenger.score:.3f})")
        best = challenger

    if best.dropped:
        message = f"{target}: collinear terms dropped {best.dropped}"
        diagnostics.append(message)
        logger.warning(f"⚠️ {message}")
    if best.result.capped:
        message = f"{target}: coefficients capped at +/-{LOGIT_COEF_CAP:g} (separation)"
        diagnostics.append(message)
        logger.warning(f"⚠️ {message}")
    elif not best.result.converged:
        message = f"{target}: Newton iterations did not converge"
        diagnostics.append(message)
        logger.warning(f"⚠️ {message}")
    if best.design.n_classes == 1:
        diagnostics.append(f"{target}: single observed state, transition is certain")

    design = best.design
    n_params = best.result.beta.size
    model = CovariateMarkovModel(
        states=design.states,
        reference_state=design.reference_state,
        covariates=tuple(c for c in best.covariates if any(
            t == c or t.startswith(f"{c}=") for t in design.terms
        )),
        terms=design.terms,
        coefficients=best.result.beta,
        levels={k: v for k, v in design.levels.items() if k in best.covariates},
        loglik=best.result.loglik,
        aic=_criterion(best.result.loglik, n_params, data.n, "aic"),
        n_obs=data.n,
        diagnostics=tuple(diagnostics),
    )
    logger.info(f"✅ {target}: multinomial logit with covariates {list(model.covariates)}")
    return model
