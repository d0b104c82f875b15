"""Seeded random streams.

Every stage of a run draws from its own named sub-stream of one master seed,
so stages can be re-run in isolation and still see the same numbers.

The kernels (compiled and pure-Python alike) use splitmix64 internally; the
helpers here reproduce it exactly so both backends agree draw for draw.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

STREAMS = ("split", "coarsen", "embed", "eval")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for stage ``name`` derived from ``seed``."""
    return np.random.default_rng([int(seed) & MASK64, zlib.crc32(name.encode())])


def as_generator(rng=None, seed: int = 0) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(seed)
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def kernel_seed(rng: np.random.Generator) -> int:
    """Draw a 64-bit seed for a kernel-side splitmix64 stream."""
    return int(rng.integers(0, 2**63, dtype=np.int64))


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def below(output: int, n: int) -> int:
    """Map a 64-bit output to [0, n) with the kernels' multiply-shift rule."""
    return ((output >> 32) * n) >> 32


def thread_seed(seed: int, tid: int) -> int:
    return (seed + GOLDEN * (tid + 1)) & MASK64
