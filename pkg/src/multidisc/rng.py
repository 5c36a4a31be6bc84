"""Seeded random streams.

Every random object is drawn from a Philox-4x64 counter-based generator keyed
by ``SeedSequence(seed, spawn_key=key)``. Substream ``key`` depends only on the
seed and the key, never on how many other streams were used, so rows of an
instance can be produced in any order or in parallel with identical results.
"""
from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def substream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed > SEED_MASK:
        raise ValueError("seed must fit in 64 unsigned bits")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


def coin_row(seed: int, length: int, *key: int) -> list[int]:
    """``length`` independent fair 0/1 coins from substream ``key``."""
    return [int(v) for v in substream(seed, *key).integers(0, 2, size=length)]


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed for a child experiment, e.g. one sample of a sweep."""
    if seed < 0 or seed > SEED_MASK:
        raise ValueError("seed must fit in 64 unsigned bits")
    state = np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1, np.uint64)
    return int(state[0])
