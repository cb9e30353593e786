"""
Virtual baseline generators: fit a model on a MixedDataset, then sample
synthetic cohorts of any size.
"""

from generators.continuous import ContinuousVBGModel, fit_continuous, sample_continuous
from generators.copulas import (
    PairCopula,
    fit_pair_copula,
    h_function,
    inverse_h,
    pair_copula_cdf,
    pair_copula_pdf,
)
from generators.discrete import DiscreteVBGModel, fit_discrete, sample_discrete
from generators.serialization import GeneratorModel, load_model, save_model
from generators.vine import VineCopulaModel, fit_vine, sample_vine, validate_structure
from utils.errors import ConfigError

FITTERS = {
    "discrete": fit_discrete,
    "continuous": fit_continuous,
    "vine": fit_vine,
}


def fit_generator(kind: str, data, seed: int = 0) -> GeneratorModel:
    """Fit the generator family named ``kind``."""
    if kind == "vine":
        return fit_vine(data, seed=seed)
    if kind not in FITTERS:
        raise ConfigError(f"Unknown generator kind '{kind}'", field="generator")
    return FITTERS[kind](data)


def sample_generator(model: GeneratorModel, n: int, seed):
    """Sample from any fitted generator."""
    if isinstance(model, DiscreteVBGModel):
        return sample_discrete(model, n, seed)
    if isinstance(model, ContinuousVBGModel):
        return sample_continuous(model, n, seed)
    return sample_vine(model, n, seed)


__all__ = [
    "ContinuousVBGModel",
    "DiscreteVBGModel",
    "FITTERS",
    "GeneratorModel",
    "PairCopula",
    "VineCopulaModel",
    "fit_continuous",
    "fit_discrete",
    "fit_generator",
    "fit_pair_copula",
    "fit_vine",
    "h_function",
    "inverse_h",
    "load_model",
    "pair_copula_cdf",
    "pair_copula_pdf",
    "sample_continuous",
    "sample_discrete",
    "sample_generator",
    "sample_vine",
    "save_model",
    "validate_structure",
]
