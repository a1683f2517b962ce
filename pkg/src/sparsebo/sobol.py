"""Quasi-random point streams: base-2 digital Sobol sequences with optional
nested-uniform scrambling.

Conventions (pinned by tests):

* Points are generated in the standard Gray-code order, so the unscrambled
  one-dimensional sequence starts 0, 1/2, 3/4, 1/4, 3/8, 7/8, 5/8, 1/8, ...
* The all-zeros index-0 point is skipped by default (``start_index=1``):
  querying an exact corner is a degenerate start for optimization.
* Scrambling is seeded and deterministic; unscrambled mode is fully
  deterministic.

Backed by :class:`scipy.stats.qmc.Sobol`, whose direction-number table covers
up to 21201 dimensions.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import qmc

MAX_DIMENSION = 21201


class SobolStream:
    """Single-owner cursor over a (scrambled) Sobol sequence.

    Reproducible from ``(dimension, scramble_seed, cursor)``; independent
    streams with distinct seeds are safe to use concurrently.
    """

    def __init__(self, dimension: int, scramble_seed: int | None = None, start_index: int = 1):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        if dimension > MAX_DIMENSION:
            raise ValueError(
                f"dimension {dimension} exceeds the {MAX_DIMENSION}-dimensional "
                "direction-number table"
            )
        if start_index < 0:
            raise ValueError("start_index must be nonnegative")
        self.dimension = dimension
        self.scramble_seed = scramble_seed
        self._engine = qmc.Sobol(
            d=dimension,
            scramble=scramble_seed is not None,
            seed=scramble_seed,
        )
        if start_index:
            self._engine.fast_forward(start_index)
        self._cursor = start_index

    @property
    def cursor(self) -> int:
        return self._cursor

    def take(self, n: int) -> np.ndarray:
        """Next n points as an (n, dimension) array with entries in [0, 1)."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        with warnings.catch_warnings():
            # arbitrary-length draws are intentional here (initial designs and
            # candidate batches are not powers of two)
            warnings.filterwarnings("ignore", message=".*balance properties.*")
            points = self._engine.random(n)
        self._cursor += n
        return points


def sobol_points(
    n: int, dimension: int, seed: int | None = None, start_index: int = 1
) -> np.ndarray:
    """First n points of the (scrambled) sequence, skipping index 0 by default."""
    return SobolStream(dimension, scramble_seed=seed, start_index=start_index).take(n)
