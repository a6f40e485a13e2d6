"""Seed derivation and pairwise-independent hashing shared by all modules."""

from __future__ import annotations

import random

import numpy as np

MERSENNE_61 = (1 << 61) - 1
_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of non-negative integers."""
    words = np.random.SeedSequence([int(p) & _MASK64 for p in parts]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


class PairwiseHash:
    """h(x) = (a*x + b) mod (2^61 - 1), drawn from a seeded stream."""

    __slots__ = ("a", "b")

    def __init__(self, seed: int):
        rng = random.Random(seed)
        self.a = rng.randrange(1, MERSENNE_61)
        self.b = rng.randrange(0, MERSENNE_61)

    def __call__(self, x: int) -> int:
        return (self.a * x + self.b) % MERSENNE_61

    def bucket(self, x: int, m: int) -> int:
        return self(x) % m


class KWiseHash:
    """Degree-(k-1) polynomial over GF(2^61 - 1); k-wise independent."""

    __slots__ = ("coeffs",)

    def __init__(self, seed: int, k: int = 4):
        rng = random.Random(seed)
        self.coeffs = [rng.randrange(0, MERSENNE_61) for _ in range(k)]

    def __call__(self, x: int) -> int:
        acc = 0
        for c in self.coeffs:
            acc = (acc * x + c) % MERSENNE_61
        return acc

    def keep(self, x: int, p: float) -> bool:
        """Bernoulli(p) decision for x."""
        return self(x) < p * MERSENNE_61
