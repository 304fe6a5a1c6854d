"""Deterministic random streams built on SplitMix64.

The generator is fully pinned down here so two runs (or two independent
implementations of this file) produce identical draw sequences:

    mix64(x):
        z = (x + 0x9E3779B97F4A7C15) mod 2^64
        z = ((z xor (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
        z = ((z xor (z >> 27)) * 0x94D049BB133111EB) mod 2^64
        return z xor (z >> 31)

    derive_seed(master, index) = mix64(master xor (index * 0x9E3779B97F4A7C15 mod 2^64))

    stream: state starts at the seed; each draw advances
        state = (state + 0x9E3779B97F4A7C15) mod 2^64 and outputs mix64-style
        scrambled state (the classic SplitMix64 next()).

Frozen regression vector: derive_seed(0, 0) == 0xE220A8397B1DCDAF.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """One SplitMix64 output for the given state."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Derive an independent 64-bit stream seed for a page index."""
    return mix64((master_seed ^ (index * _GOLDEN)) & _MASK64)


class SplitMix64:
    """Seeded uniform random stream with the few draw kinds the pipeline needs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError(f"randbelow requires n >= 1, got {n}")
        k = (n - 1).bit_length()
        while True:
            r = self.next_u64() >> (64 - k) if k else 0
            if r < n:
                return r

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()
