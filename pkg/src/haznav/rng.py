"""Deterministic counter-based random numbers (SplitMix64).

Every stochastic choice in this package is drawn from this generator so
that a run is a pure function of its seed, and so that a port to another
language can reproduce golden sequences exactly.  The algorithm is
SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
generators"):

    state   <- (state + 0x9E3779B97F4A7C15) mod 2^64      # counter step
    z       <- state
    z       <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9     mod 2^64
    z       <- (z XOR (z >> 27)) * 0x94D049BB133111EB     mod 2^64
    output  <- z XOR (z >> 31)

The state is literally a counter advanced by a fixed increment, so draw
number i from seed s is mix64(s + (i+1)*GAMMA) regardless of how draws
are batched.  Floats in [0, 1) take the top 53 bits: (u >> 11) * 2^-53.
Bounded integers use plain modulo (u mod n); the bias is irrelevant here
and the rule is trivial to replicate.

Sub-seeds are derived as  mix64(master XOR fnv1a64(label))  where
fnv1a64 is the 64-bit FNV-1a hash of the label's UTF-8 bytes.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def derive_seed(master_seed: int, label: str) -> int:
    """Deterministic per-module seed from a master seed and a label."""
    return mix64((master_seed & MASK64) ^ fnv1a64(label))


class Rng:
    """Seeded SplitMix64 stream.

    Scalar and vectorized draws consume the same underlying counter, so
    ``[rng.next_u64() for _ in range(n)]`` equals ``rng.u64_array(n)``.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def u64_array(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = (np.uint64(self._state) + steps * np.uint64(GAMMA)).astype(np.uint64)
        self._state = (self._state + n * GAMMA) & MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def next_float(self) -> float:
        """Uniform draw in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def float_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def uniform_array(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.float_array(n)

    def next_below(self, n: int) -> int:
        """Uniform-ish integer in [0, n)."""
        if n <= 0:
            raise ValueError("next_below needs n >= 1")
        return self.next_u64() % n

    def shuffle(self, items) -> None:
        """In-place Fisher-Yates shuffle of a list or 1-d array."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self, label: str) -> "Rng":
        """Independent child stream; stable under draw-order changes elsewhere."""
        return Rng(derive_seed(self.seed, label))
