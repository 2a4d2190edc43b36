"""Counter-based keyed randomness.

A :class:`Key` names one random stream by ``(seed, path)``. Streams are
Philox generators seeded through :class:`numpy.random.SeedSequence` with the
path as spawn key, so any draw is reproducible from its address alone and
independent of the order in which other draws happen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Key:
    seed: int
    path: tuple = ()

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    def split(self, *index: int) -> "Key":
        return Key(self.seed, self.path + tuple(index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def normal(self, size) -> np.ndarray:
        return self.generator().standard_normal(size)

    def uniform(self, size) -> np.ndarray:
        return self.generator().random(size)

    def integers(self, high, size) -> np.ndarray:
        return self.generator().integers(0, high, size)

    def to_list(self):
        return [self.seed, list(self.path)]


def as_key(seed) -> Key:
    if isinstance(seed, Key):
        return seed
    return Key(int(seed))
