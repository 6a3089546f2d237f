"""Portable seeded shuffling for reproducible dataset splits.

The generator is SplitMix64 (Steele, Lea & Flood's 64-bit mixer, as used to
seed the xoshiro family): state advances by the golden-gamma constant
0x9E3779B97F4A7C15 and is finalized with two xor-multiply rounds.  Seeding is
the raw 64-bit seed value (masked to 64 bits).  Shuffling is a backwards
Fisher-Yates with unbiased bounded draws via rejection sampling.  All of this
is plain integer arithmetic, so identical seeds reproduce identical splits on
any platform or language.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

T = TypeVar("T")


class SplitMix64:
    """SplitMix64 stream over a 64-bit seed."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) without modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        # Reject draws above the largest multiple of bound representable in
        # 64 bits; expected iterations < 2.
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_uint64()
            if value < limit:
                return value % bound


def shuffled(items: Sequence[T], seed: int) -> list[T]:
    """A seed-determined permutation of ``items`` (input left untouched)."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
