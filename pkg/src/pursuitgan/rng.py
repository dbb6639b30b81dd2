"""Stable seed derivation so that independent work items get independent streams."""

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master, *keys):
    """Mix a master seed with integer keys into a 64-bit seed.

    The mapping depends only on its arguments, so per-item streams do not
    depend on evaluation order or on how work is split between processes.
    """
    h = _splitmix64(int(master) & _MASK)
    for k in keys:
        h = _splitmix64(h ^ (int(k) & _MASK))
    return h


def derived_rng(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))
