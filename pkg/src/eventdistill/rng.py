"""Portable seeded PRNG used for corpus splitting and sequence simulation.

Every randomized step in the pipeline goes through this generator rather
than the interpreter's built-in RNG, so a split or a simulated corpus can
be reproduced byte-for-byte from the seed alone, in any language.

Algorithm (xorshift64*), operating on 64-bit unsigned state:

    state = seed mod 2**64; if state == 0, state = 0x9E3779B97F4A7C15
    next():
        state ^= state >> 12
        state ^= (state << 25) mod 2**64
        state ^= state >> 27
        return (state * 0x2545F4914F6CDD1D) mod 2**64

Derived draws:

    uniform()    = next() / 2**64                      (float in [0, 1))
    randbelow(n) = next() mod n
    shuffle(a)   = Fisher-Yates: for i = len(a)-1 .. 1: swap a[i], a[randbelow(i+1)]
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_ZERO_SEED_STATE = 0x9E3779B97F4A7C15
_MULTIPLIER = 0x2545F4914F6CDD1D


class XorShift64Star:
    """xorshift64* generator; see the module docstring for the exact recurrence."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        self._state = state if state != 0 else _ZERO_SEED_STATE

    def next_u64(self) -> int:
        s = self._state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _MASK64
        s ^= s >> 27
        self._state = s
        return (s * _MULTIPLIER) & _MASK64

    def uniform(self) -> float:
        """One float in [0, 1)."""
        return self.next_u64() / 2.0**64

    def randbelow(self, n: int) -> int:
        """One integer in [0, n). Plain modulo reduction, kept for portability."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, high index down to 1."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
