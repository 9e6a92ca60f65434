"""Counter-based randomness: reproducible, splittable by (seed, stream index)."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, stream); independent streams never collide."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_measure(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. indices from a probability vector by inverse CDF."""
    cum = np.cumsum(weights)
    u = rng.random(n)
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(weights) - 1)
