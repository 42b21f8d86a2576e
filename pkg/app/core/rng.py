"""Deterministic stream derivation.

Every random draw in a run is keyed by (base_seed, stream tag, replicate
index, position...). Streams never depend on each other, so the result of a
replicate is independent of which worker computes it or in which order.
"""
from enum import IntEnum

import numpy as np


class StreamTag(IntEnum):
    ENVIRONMENT = 0
    POPULATION = 1
    AUXILIARY = 2


def derive_seed_sequence(base_seed: int, tag: StreamTag, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(tag), *[int(k) for k in keys]])


def derive_rng(base_seed: int, tag: StreamTag, *keys: int) -> np.random.Generator:
    """Generator for the stream keyed by (base_seed, tag, *keys)."""
    return np.random.default_rng(derive_seed_sequence(base_seed, tag, *keys))

