"""Deterministic seed derivation.

One master seed fans out into per-task streams through a splitmix64 chain
keyed by integer indices or string labels, so adding a new task never
perturbs the draws of an existing one.  Floats (noise levels, mostly) are
folded in by their IEEE-754 bit pattern.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 output step (Steele-Lea-Flood mix; pure 64-bit integer)."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *labels: int | float | str) -> int:
    """Mix labels into `master`, one splitmix64 step per token."""
    state = master & _MASK
    for label in labels:
        if isinstance(label, str):
            for byte in label.encode():
                state = splitmix64(state ^ byte)
        elif isinstance(label, float):
            state = splitmix64(state ^ int(np.float64(label).view(np.uint64)))
        else:
            state = splitmix64(state ^ (int(label) & _MASK))
    return splitmix64(state)


def rng_for(master: int, *labels: int | float | str) -> np.random.Generator:
    """PCG64 generator for the stream named by `labels` under `master`."""
    return np.random.default_rng(derive_seed(master, *labels))
