"""Seedable random generator with deterministic, splittable streams."""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One splitmix64 step; used to derive independent child seeds."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class Rng:
    """Counter-based generator: identical seeds emit identical streams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, index: int) -> "Rng":
        """Derive an independent stream; deterministic in (seed, index)."""
        return Rng(_splitmix64(self.seed ^ _splitmix64(int(index) + 1)))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size)

    def chisquare(self, df, size=None):
        return self._gen.chisquare(df, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size=None, replace: bool = True):
        return self._gen.choice(n, size=size, replace=replace)

    def get_state(self) -> dict:
        """Serializable snapshot of seed plus internal counter state."""
        return {"seed": self.seed, "state": self._gen.bit_generator.state}

    def set_state(self, snapshot: dict) -> None:
        self.seed = int(snapshot["seed"])
        self._gen.bit_generator.state = snapshot["state"]
