"""
Execution models: Markov chains, multinomial-logit transitions and outcome
generators with confusion-matrix noise.
"""

from execution.effects import (
    ExecutionModels,
    StateTransitionModel,
    calibrate_execution_models,
    fit_state_transitions,
    transition_table,
)
from execution.logit import fit_multinomial_logit
from execution.markov import (
    ConstantMarkovModel,
    CovariateMarkovModel,
    fit_constant_markov,
    step_markov,
    transition_probs,
)
from execution.outcomes import (
    ConfusionMatrix,
    OutcomeGenerator,
    PairedOutcomes,
    ate_paired,
    ate_two_sample,
    build_outcome_generator,
    confusion_matrix,
    fit_outcome_classifier,
    simulate_outcome,
    simulate_outcomes,
    simulate_paired_outcomes,
)
from execution.serialization import load_execution_models, save_execution_models

__all__ = [
    "ConfusionMatrix",
    "ConstantMarkovModel",
    "CovariateMarkovModel",
    "ExecutionModels",
    "OutcomeGenerator",
    "PairedOutcomes",
    "StateTransitionModel",
    "ate_paired",
    "ate_two_sample",
    "build_outcome_generator",
    "calibrate_execution_models",
    "confusion_matrix",
    "fit_constant_markov",
    "fit_multinomial_logit",
    "fit_outcome_classifier",
    "fit_state_transitions",
    "load_execution_models",
    "save_execution_models",
    "simulate_outcome",
    "simulate_outcomes",
    "simulate_paired_outcomes",
    "step_markov",
    "transition_probs",
    "transition_table",
]
