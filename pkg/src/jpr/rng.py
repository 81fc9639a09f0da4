"""Reproducible random streams.

Every random draw in the package comes from a Philox counter-based
generator keyed by ``(seed, stream...)``. A replicate's stream depends only
on its key, never on which thread produced it or in what order, which is
what makes replicate-parallel runs bit-identical to serial ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    """A ``(seed, stream_id)`` pair naming one independent random stream.

    ``stream_id`` may be a single integer or a tuple of integers, e.g.
    ``(window, replicate)``; tuples let callers carve nested namespaces
    without arithmetic on ids.
    """

    seed: int
    stream_id: int | tuple[int, ...] = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        ids = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        if any(not 0 <= int(i) <= _MASK64 for i in ids):
            raise ValueError("stream ids must be 64-bit unsigned integers")

    @property
    def key(self) -> tuple[int, ...]:
        if isinstance(self.stream_id, tuple):
            return tuple(int(i) for i in self.stream_id)
        return (int(self.stream_id),)

    def child(self, *ids: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Shorthand for ``RandomSource(seed, stream).generator()``."""
    return RandomSource(seed, tuple(stream)).generator()
