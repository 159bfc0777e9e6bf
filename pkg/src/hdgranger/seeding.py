"""Deterministic seed derivation.

All randomness in the package flows from one master seed through numpy
``SeedSequence`` spawn keys.  A child stream is addressed by a tuple of
integers appended to the parent's spawn key, so any sub-computation
(a bootstrap replicate, a Monte Carlo run, a forecast window) can be
re-derived in isolation without running what came before it.  Streams
never depend on execution order, which is what makes serial and parallel
runs bit-identical.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, PCG64, SeedSequence

SeedLike = "int | SeedSequence"


def as_seed_sequence(seed) -> SeedSequence:
    """Coerce an integer seed (or an existing SeedSequence) to a SeedSequence."""
    if isinstance(seed, SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        return SeedSequence(int(seed))
    raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")


def child(seed, *key: int) -> SeedSequence:
    """Derive the child stream addressed by `key` below `seed`.

    Children with different keys are statistically independent; the same
    key always yields the same stream regardless of how many siblings
    were derived before it.
    """
    base = as_seed_sequence(seed)
    return SeedSequence(entropy=base.entropy,
                        spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key))


def generator(seed, *key: int) -> Generator:
    """A PCG64 generator for the child stream addressed by `key`."""
    return Generator(PCG64(child(seed, *key)))
