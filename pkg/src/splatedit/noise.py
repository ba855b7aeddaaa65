"""Deterministic noise materialization from compact 64-bit seeds.

Datasets store only the seed; the full Gaussian array is regenerated on
demand with the Philox counter-based generator, which gives the same stream
on every platform and run.
"""

from __future__ import annotations

import numpy as np


def materialize_noise(seed: int, shape) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    return gen.standard_normal(shape, dtype=np.float32)


def derive_seed(*parts) -> int:
    """Mix integers into one 64-bit seed with splitmix64 rounds."""
    state = 0x9E3779B97F4A7C15
    for p in parts:
        state = (state + int(p) + 0x9E3779B97F4A7C15) & (2 ** 64 - 1)
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & (2 ** 64 - 1)
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & (2 ** 64 - 1)
        state = z ^ (z >> 31)
    return state
