"""Seeded random streams and the binomial/multinomial draws built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    A stream is identified by a root ``seed`` plus a path of integer ids.
    Two streams with the same (seed, path) always produce bit-identical
    draws, independent of which other streams were used before.

    Examples
    --------
    >>> s = RngStream(7, (3,))
    >>> int(s.generator().integers(100)) == int(s.generator().integers(100))
    True
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if any(i < 0 for i in self.path):
            raise ValueError(f"stream ids must be non-negative, got {self.path}")

    @property
    def stream_id(self) -> int:
        return self.path[-1] if self.path else 0

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) for i in ids))

    def children(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected an RngStream or int seed, got {type(rng).__name__}")


def binomial(gen: np.random.Generator, n: int, p: float) -> int:
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return int(n)
    return int(gen.binomial(n, p))


def multinomial2(gen: np.random.Generator, n: int, p1: float, p2: float) -> tuple[int, int]:
    """Draw the first two cells of Mult(n; p1, p2, 1 - p1 - p2).

    Sampled as conditional binomials: the first cell from Bin(n, p1), the
    second from Bin(n - first, p2 / (1 - p1)).
    """
    first = binomial(gen, n, p1)
    rest = n - first
    if rest == 0 or p2 <= 0.0:
        return first, 0
    if p1 >= 1.0:
        return first, 0
    q = min(p2 / (1.0 - p1), 1.0)
    return first, binomial(gen, rest, q)
