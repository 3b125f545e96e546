"""Seeded operand generator, portable across languages.

SplitMix64: ``state += 0x9E3779B97F4A7C15``; then
``z = state``; ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``;
``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``; ``return z ^ (z >> 31)``,
all modulo 2**64. A ``bits``-wide operand is the top ``bits`` of one or
more successive outputs (high word first for widths above 64).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def bits(self, width: int) -> int:
        if width <= 0:
            return 0
        v, have = 0, 0
        while have < width:
            v = (v << 64) | self.next()
            have += 64
        return v >> (have - width)

    def operands(self, n: int, width: int) -> list[int]:
        return [self.bits(width) for _ in range(n)]
