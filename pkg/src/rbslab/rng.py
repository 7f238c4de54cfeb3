"""Seed plumbing.

Every random stream in the package is a Philox (counter-based) generator
built from a :class:`numpy.random.SeedSequence`, so independent substreams
can be derived by spawn keys and replayed in isolation.
"""

from __future__ import annotations

import os
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, None]

SEED_ENV = "RBSLAB_SEED"


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        seed = default_seed()
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(as_seed_sequence(seed)))


def substream(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Deterministic child sequence addressed by ``key``.

    Unlike ``SeedSequence.spawn`` this does not depend on how many children
    were spawned before, so draw ``i`` of an experiment can be replayed alone.
    """
    parent = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(int(k) for k in key),
    )


def describe(seed: np.random.SeedSequence) -> dict:
    return {"entropy": int(seed.entropy), "spawn_key": [int(k) for k in seed.spawn_key]}
