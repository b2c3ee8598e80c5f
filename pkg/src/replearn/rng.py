"""Deterministic randomness: a 64-bit mixer, keyed priorities, and substreams.

Everything downstream that needs reproducibility routes through this module.
Two constructions live here:

* ``mix64`` / ``mix64_array`` — the SplitMix64 finalizer.  It is the only
  bit-mixing primitive used anywhere, so results are reproducible across
  platforms and numpy versions.

* ``priority`` / ``priority_columns`` — a keyed pseudorandom priority for
  hypothesis indices.  Sorting all indices by priority realizes a shared
  shuffle without materializing it; callers only ever take an argmin.

The priority function is fixed bit-exactly (see ``priority``), not a tunable:
two processes given the same 128-bit key must rank hypotheses identically.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
COORD_MULT = 0xD6E8FEB86659FD93
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_SEED_TAG = 0xA0761D6478BD642F


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """``mix64`` applied elementwise to a uint64 array (wrapping multiplies)."""
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


def priority(key_lo: int, key_hi: int, coords) -> int:
    """64-bit priority of one index vector under a 128-bit key.

    Defined exactly as::

        h = mix64(key_lo)
        for j, c in enumerate(coords):
            h = mix64((h + GAMMA) ^ (c * COORD_MULT) ^ (key_hi + j))

    with every operation taken mod 2**64.  Ties across distinct coords are
    possible in principle (64-bit birthday collisions) and are broken
    lexicographically by the callers.
    """
    h = mix64(key_lo)
    for j, c in enumerate(coords):
        h = mix64((h + GAMMA) ^ ((int(c) * COORD_MULT) & MASK64) ^ ((key_hi + j) & MASK64))
    return h


def priority_columns(key_lo: np.ndarray, key_hi: np.ndarray, columns) -> np.ndarray:
    """Vectorized ``priority`` over column arrays of coordinates.

    ``key_lo``/``key_hi`` broadcast against each column in ``columns`` (one
    array per coordinate, all the same shape).  Returns a uint64 array of that
    shape.  Bit-identical to the scalar path.
    """
    h = mix64_array(np.asarray(key_lo, dtype=np.uint64))
    hi = np.asarray(key_hi, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j, col in enumerate(columns):
            c = col.astype(np.uint64) * np.uint64(COORD_MULT)
            h = mix64_array((h + np.uint64(GAMMA)) ^ c ^ (hi + np.uint64(j)))
    return h


def derive_seed(master_seed: int, *path: int) -> int:
    """Substream seed derived from a master seed and an integer path.

    Folding is ``h = mix64(master ^ tag)`` then ``h = mix64(h ^ (part + GAMMA))``
    per path component, so distinct (trial, role) paths land in distinct
    streams regardless of evaluation order.
    """
    h = mix64((master_seed & MASK64) ^ _SEED_TAG)
    for part in path:
        h = mix64(h ^ ((part + GAMMA) & MASK64))
    return h


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent PCG64 generator for the given (master seed, path)."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *path)))


# Role tags for per-trial substreams in the harness.
ROLE_TARGET = 0
ROLE_KEY = 1
ROLE_SAMPLE1 = 2
ROLE_SAMPLE2 = 3
