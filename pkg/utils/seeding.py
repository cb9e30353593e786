"""
Seed splitting for reproducible, order-independent random streams.

A master seed is split into named sub-streams by hashing ``"{master}:{name}"``
with SHA-256 and keeping the first 8 bytes (big-endian). The resulting integer
seeds a ``numpy.random.SeedSequence`` driving a PCG64 generator, so results do not
depend on how many draws other streams consumed.
"""

import hashlib

import numpy as np

from utils.errors import ConfigError


def split_seed(master_seed: int, name: str) -> int:
    """Derive the integer seed of stream ``name`` from ``master_seed``."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Build a PCG64 generator from an integer seed (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ConfigError("a seed is required; wall-clock seeding is not supported", field="seed")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Generator for the named sub-stream of ``master_seed``."""
    return make_rng(split_seed(master_seed, name))
