# app/lab/seeding.py
"""Deterministic seed derivation.

Child seeds come from a splitmix64 finaliser applied to ``seed + (r + 1) * GOLDEN``
(all arithmetic mod 2**64)::

    z = (seed + (r + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    z =   z ^ (z >> 31)

Any language with 64-bit unsigned integers reproduces the same child seeds.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags for derived generators of a single instance seed
OUTCOME_STREAM = 0x0B
SUPPORT_STREAM = 0x5A
POWER_STREAM = 0x70


def mix(seed: int, r: int) -> int:
    if seed < 0 or r < 0:
        raise ValueError("seed and replicate index must be nonnegative")
    z = (seed + (r + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(base_seed: int, n: int, r: int) -> int:
    """Seed of replicate ``r`` at problem size ``n``."""
    return mix(mix(base_seed, n), r)


def rng_for(seed: int, stream: int | None = None) -> np.random.Generator:
    return np.random.default_rng(seed if stream is None else mix(seed, stream))
