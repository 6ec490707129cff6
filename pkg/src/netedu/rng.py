"""Seeded splitmix64 PRNG shared by the simulator and the exercise engine.

All randomized behavior in this package (impairment decisions, question
randomization, allocation draws) goes through this generator so that a run
is fully reproduced by its seed, independent of interpreter hash seeds or
platform. Constants are the published splitmix64 ones.
"""

from __future__ import annotations

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """64-bit splitmix64 stream. One instance = one independent draw stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        # top 53 bits / 2^53, uniform in [0, 1)
        return (self.next_u64() >> 11) / 9007199254740992.0

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.next_float() * n)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k distinct elements, uniform without replacement (partial shuffle)."""
        if k > len(items):
            raise ValueError("sample larger than population")
        pool = list(items)
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def derive_seed(*parts: int | str) -> int:
    """Mix several components (ints or strings) into one 64-bit seed.

    Used to give sub-streams (per direction, per exercise attempt) seeds
    that are decorrelated but fully determined by the parent seed.
    """
    acc = 0x5555555555555555
    for part in parts:
        if isinstance(part, str):
            for ch in part.encode("utf-8"):
                acc = ((acc ^ ch) * 0x100000001B3) & _MASK64
        else:
            acc = (acc ^ (part & _MASK64)) & _MASK64
            acc = (acc * 0x100000001B3) & _MASK64
        # one splitmix scramble between parts so ("a", 1) != ("a1",)
        acc = SplitMix64(acc).next_u64()
    return acc
