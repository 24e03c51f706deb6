from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Named random streams. Each stochastic consumer draws from its own stream."""

    INIT = 0
    ENV = 1
    BUFFER = 2
    GUMBEL = 3
    PLANNER = 4
    EVAL = 5
    CODEBOOK = 6
    EXPLORE = 7
    ORACLE = 8


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by (seed, *stream); bit-reproducible per key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Independent child generators, e.g. one per rollout worker."""
    return rng.spawn(n)
