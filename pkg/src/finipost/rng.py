"""Deterministic, splittable random state derivation.

Every sampling operation in this package takes an explicit state; nothing
reads ambient randomness.  States are counter-based (Philox) generators
keyed by a 64-bit hash of ``(master_seed, replicate, stream)``, so any
cell of an experiment grid can be reproduced in isolation and concurrent
replicates never share a stream.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngState", "derive_seed", "derive_key", "state_from_key", "splitmix64"]

# A sampling state is a numpy Generator over a counter-based bit stream.
RngState = np.random.Generator

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One SplitMix64 finalization round (Steele, Lea & Flood 2014)."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_key(master: int, replicate: int = 0, stream: int = 0) -> int:
    """Mix ``(master, replicate, stream)`` into a single 64-bit key.

    The mixing is three chained SplitMix64 absorptions:

        k = splitmix64(splitmix64(splitmix64(master) ^ replicate) ^ stream)

    This is fixed for all versions of the package; the golden test vector
    ``derive_key(0, 0, 0) == 0x238275BC38FCBE91`` is asserted in the suite.
    """
    h = splitmix64(master & _MASK64)
    h = splitmix64(h ^ (replicate & _MASK64))
    h = splitmix64(h ^ (stream & _MASK64))
    return h


def state_from_key(key: int) -> RngState:
    """Build the counter-based generator for a 64-bit key."""
    return np.random.Generator(np.random.Philox(key=np.array([key & _MASK64, _GOLDEN], dtype=np.uint64)))


def derive_seed(master: int, replicate: int = 0, stream: int = 0) -> RngState:
    """Derive an independent sampling state for one experiment cell.

    Distinct ``(master, replicate, stream)`` triples give distinct keys
    (collision-checked on a million-triple sample in the test suite) and
    therefore independent Philox streams.
    """
    return state_from_key(derive_key(master, replicate, stream))
