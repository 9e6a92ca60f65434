"""Canonical test instances: matrices, measures, and step-function families."""

from __future__ import annotations

import numpy as np

from .core import Axis, DiscreteMeasure, FuzzyPredicate
from .rng import stream_rng
from .sampling import StepFunctionFamily


def half_graph(n: int) -> FuzzyPredicate:
    """Entry (i, j) = 1 if i < j else 0."""
    i, j = np.indices((n, n))
    return FuzzyPredicate.from_array((i < j).astype(float), ["x", "y"])


def identity_matrix(n: int) -> FuzzyPredicate:
    return FuzzyPredicate.from_array(np.eye(n), ["x", "y"])


def constant_matrix(n: int, value: float = 0.7, m: int | None = None) -> FuzzyPredicate:
    return FuzzyPredicate.from_array(np.full((n, m or n), value), ["x", "y"])


def threshold_matrix(n: int) -> FuzzyPredicate:
    """Entry (i, j) = |i - j| / n."""
    i, j = np.indices((n, n))
    return FuzzyPredicate.from_array(np.abs(i - j) / n, ["x", "y"])


def random_matrix(n: int, seed: int, m: int | None = None) -> FuzzyPredicate:
    rng = stream_rng(seed, 0)
    return FuzzyPredicate.from_array(rng.random((n, m or n)), ["x", "y"])


def uniform(n: int, name: str = "x") -> DiscreteMeasure:
    return DiscreteMeasure.uniform(Axis(name, n))


def square_wave_family(alternations: int = 6, members: int = 1) -> StepFunctionFamily:
    """0/1 square waves; member k has `alternations` value flips, phase-shifted."""
    pieces = alternations + 1
    bp = np.linspace(0.0, 1.0, pieces + 1)
    vals = np.array([[(p + k) % 2 for p in range(pieces)] for k in range(members)], dtype=float)
    return StepFunctionFamily(bp, vals)


def random_step_family(members: int, max_jumps: int, seed: int) -> StepFunctionFamily:
    """Random [0,1]-valued step functions on a shared random grid."""
    rng = stream_rng(seed, 1)
    jumps = int(rng.integers(1, max_jumps + 1))
    cuts = np.sort(rng.random(jumps))
    bp = np.concatenate(([0.0], cuts, [1.0]))
    bp = np.unique(bp)
    vals = rng.random((members, len(bp) - 1))
    return StepFunctionFamily(bp, vals)


GENERATORS = {
    "constant": lambda n, **kw: constant_matrix(n, **kw),
    "identity": lambda n, **kw: identity_matrix(n),
    "half-graph": lambda n, **kw: half_graph(n),
    "threshold": lambda n, **kw: threshold_matrix(n),
    "random": lambda n, seed=0, **kw: random_matrix(n, seed),
}
