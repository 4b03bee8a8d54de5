"""Deterministic 64-bit PRNG used everywhere randomness must be replayable.

Sampling of training examples, train/test splits, and fixture generation all
go through this generator so that results are bit-stable across platforms and
numpy versions. The core is xorshift64*; seeding runs the raw seed through a
splitmix64 step so that small consecutive seeds give unrelated streams.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class XorShift64Star:
    """xorshift64* generator with a single 64-bit word of state."""

    def __init__(self, seed: int):
        state = _splitmix64(seed & _MASK64)
        # the all-zero state is a fixed point of xorshift
        self.state = state if state != 0 else 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via 128-bit multiply-shift.

        Bias is at most n / 2**64, negligible for any dataset size.
        """
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self) -> float:
        """Standard normal via Box-Muller (no state beyond the integer word)."""
        # draw until u1 > 0 so log() is safe; probability of retry is 2^-53
        u1 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
