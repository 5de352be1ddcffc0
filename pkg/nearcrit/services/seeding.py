"""
Deterministic random streams.

A run is driven by one 64-bit master seed. Every independent consumer of
randomness (a replica, or a named stream inside a replica) gets its own
generator through ``SeedSequence(entropy=seed, spawn_key=key)``, which is the
counter-based derivation numpy uses for ``SeedSequence.spawn``. Generators are
backed by ``SFC64``.

The derivation depends only on (seed, key), never on scheduling order, so
replicas can be evaluated by any number of worker threads.
"""
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1

# Stream keys. Replica r of an estimator uses (REPLICA, r).
REPLICA = 0
BIRTHS = 1
IGNITIONS = 2
RECOVERY = 3
MARKS = 4
HOLES = 5
FIELD = 6

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """
    Build the generator for a master seed and a stream key.

    Args:
        seed: Master seed, reduced modulo 2**64
        key: Stream key (sequence of non-negative integers)

    Returns:
        A fresh ``numpy.random.Generator``
    """
    sequence = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.SFC64(sequence))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Generator of replica ``replica`` under master seed ``seed``."""
    return make_rng(seed, REPLICA, replica)


def as_rng(seed: SeedLike, *key: int) -> np.random.Generator:
    """Accept either a master seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed, *key)


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 64-bit seed from a generator (used to hand a sub-task its own master seed)."""
    return int(rng.integers(0, MASK64, dtype=np.uint64, endpoint=True))
