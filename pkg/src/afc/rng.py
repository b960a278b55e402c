"""Deterministic RNG substream derivation for reproducible experiments."""

from __future__ import annotations

import numpy as np

# Domain tags keep unrelated uses of the same (seed, trial) on disjoint streams.
GRAPH = 1
MESSAGE = 2
NOISE = 3
SEARCH = 4


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream addressed by (seed, *path).

    The same address always yields the same stream; distinct addresses are
    statistically independent. Extending a run with more trials never
    reshuffles the streams already consumed.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))
