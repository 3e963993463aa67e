"""Deterministic pseudo-random numbers for the sample generator.

Implements the 32-bit permuted congruential generator (PCG-XSH-RR with a
64-bit state) so that sample streams are reproducible bit for bit for a given
seed, independent of platform and of how many values are requested per call.

The linear congruential state update is vectorised in blocks: after ``k``
steps the state is ``a^k * s + g_k * c (mod 2^64)`` with ``g_k`` the partial
geometric sum of the multiplier, so a whole block of states is obtained from
two precomputed coefficient tables and one fused numpy expression.
"""

from __future__ import annotations

import numpy as np

_MULT = 6364136223846793005
_MASK = (1 << 64) - 1
_BLOCK = 1 << 15

_TABLES: tuple[np.ndarray, np.ndarray] | None = None


def _tables() -> tuple[np.ndarray, np.ndarray]:
    """Coefficient tables (a^k, sum_{i<k} a^i) for k = 0 .. _BLOCK."""
    global _TABLES
    if _TABLES is None:
        powers = [1] * (_BLOCK + 1)
        gsums = [0] * (_BLOCK + 1)
        for k in range(_BLOCK):
            powers[k + 1] = (powers[k] * _MULT) & _MASK
            gsums[k + 1] = (gsums[k] * _MULT + 1) & _MASK
        _TABLES = (np.array(powers, dtype=np.uint64), np.array(gsums, dtype=np.uint64))
    return _TABLES


class Pcg32:
    """PCG-XSH-RR 64/32 stream with block-vectorised output.

    Parameters
    ----------
    seed : int
        Initial state contribution; any non-negative integer.
    stream : int, optional
        Stream selector; distinct values give statistically independent
        sequences for the same seed.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._inc = ((stream << 1) | 1) & _MASK
        state = (self._inc + seed) & _MASK  # one update from state 0, then mix in the seed
        self._state = (state * _MULT + self._inc) & _MASK

    def uint32(self, count: int) -> np.ndarray:
        """Return the next `count` raw 32-bit outputs as a uint32 array."""
        if count < 0:
            raise ValueError("count must be non-negative")
        powers, gsums = _tables()
        out = np.empty(count, dtype=np.uint32)
        pos = 0
        inc = np.uint64(self._inc)
        while pos < count:
            k = min(_BLOCK, count - pos)
            s = np.uint64(self._state)
            states = powers[:k] * s + gsums[:k] * inc
            xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)).astype(np.uint32)
            rot = (states >> np.uint64(59)).astype(np.uint32)
            out[pos:pos + k] = (xorshifted >> rot) | (
                xorshifted << ((np.uint32(32) - rot) & np.uint32(31))
            )
            self._state = (int(powers[k]) * self._state + int(gsums[k]) * self._inc) & _MASK
            pos += k
        return out

    def random(self, count: int) -> np.ndarray:
        """Return `count` doubles uniform in [0, 1) with 53 random bits each.

        Consumes exactly two 32-bit outputs per double, so the stream position
        does not depend on batching.
        """
        raw = self.uint32(2 * count)
        hi = (raw[0::2] >> np.uint32(5)).astype(np.float64)
        lo = (raw[1::2] >> np.uint32(6)).astype(np.float64)
        return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0)
