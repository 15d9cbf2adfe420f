"""Seeded random streams.

Every stochastic choice in the package draws from a Philox-4x64 counter-based
generator (numpy's implementation, bit-stable across platforms). Streams are
keyed by a 64-bit master seed plus a tuple of integer labels, hashed through
SplitMix64, so ``stream(seed, 3, 1)`` and ``stream(seed, 3, 2)`` never overlap.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(seed: int, *labels: int) -> int:
    """Fold integer labels into a 64-bit child seed."""
    h = splitmix64(seed & MASK64)
    for lab in labels:
        h = splitmix64(h ^ (lab & MASK64))
    return h


def stream(seed: int, *labels: int) -> np.random.Generator:
    key = derive(seed, *labels)
    return np.random.Generator(np.random.Philox(key=[key, derive(key, 0x5EED)]))


def randbelow(seed: int, n: int, *labels: int) -> int:
    """Uniform integer in [0, n) by rejection on a single 64-bit draw stream."""
    if n <= 0:
        raise ValueError("n must be positive")
    gen = stream(seed, *labels)
    limit = (1 << 64) - ((1 << 64) % n)
    while True:
        x = int(gen.integers(0, 1 << 64, dtype=np.uint64))
        if x < limit:
            return x % n
