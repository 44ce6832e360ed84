"""Splittable deterministic random streams.

Every random draw in the package flows through an :class:`RngStream`. A
stream is identified by ``(seed, path)``; ``split(i)`` derives a child whose
output depends only on the parent's identity and ``i``, never on how much of
the parent has been consumed. Streams are backed by numpy's counter-based
Philox bit generator keyed through ``SeedSequence``.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """A seeded, splittable source of randomness.

    Parameters
    ----------
    seed : int
        64-bit seed. Negative values are reduced modulo 2**64.
    path : tuple of int, optional
        Split indices leading from the root stream to this one.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def split(self, i: int) -> "RngStream":
        if i < 0:
            raise ValueError("split index must be nonnegative")
        return RngStream(self.seed, self.path + (int(i),))

    def spawn(self, count: int, offset: int = 0) -> list["RngStream"]:
        return [self.split(offset + j) for j in range(count)]

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    # thin pass-throughs used throughout the package
    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def as_stream(rng) -> RngStream:
    """Accept an RngStream or an integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")
