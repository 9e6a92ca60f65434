"""Core data model: fuzzy predicates, discrete measures, partitions of unity.

All values are 64-bit floats.  Probability sums and sandwich comparisons use
absolute tolerance SUM_TOL; supports are strict-positivity sets cut off at
SUPPORT_TOL so rounding noise cannot inflate them.  Every type is immutable
after construction and every operation is a pure function of its inputs.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SUM_TOL = 1e-9
SUPPORT_TOL = 1e-12
EXACT_TOL = 1e-12


class AxisMismatchError(ValueError):
    """Measure/predicate axes do not line up."""


class DegenerateLocalizationError(ValueError):
    """Localization density has (numerically) zero mass."""


@dataclass(frozen=True)
class Axis:
    """A named finite index set {0, ..., size-1}."""

    name: str
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"axis {self.name!r} must have size >= 1, got {self.size}")


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FuzzyPredicate:
    """A [0,1]-valued tensor indexed by finite axes.

    The finite restriction of a graded relation on n sorts; entry order
    follows the axis order.
    """

    axes: tuple[Axis, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        vals = _readonly(self.values)
        object.__setattr__(self, "values", vals)
        if len(self.axes) < 1:
            raise ValueError("predicate needs at least one axis")
        shape = tuple(ax.size for ax in self.axes)
        if vals.shape != shape:
            raise ValueError(f"tensor shape {vals.shape} != axis sizes {shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("predicate entries must lie in [0,1]")

    @property
    def arity(self) -> int:
        return len(self.axes)

    @classmethod
    def from_array(cls, values, axis_names: Sequence[str] | None = None) -> "FuzzyPredicate":
        vals = np.asarray(values, dtype=float)
        names = axis_names or [f"x{i+1}" for i in range(vals.ndim)]
        axes = tuple(Axis(str(n), s) for n, s in zip(names, vals.shape))
        return cls(axes, vals)

    def transpose(self) -> "FuzzyPredicate":
        if self.arity != 2:
            raise ValueError("transpose is defined for binary predicates only")
        return FuzzyPredicate((self.axes[1], self.axes[0]), self.values.T)


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finitely supported probability vector on one axis."""

    axis: Axis
    weights: np.ndarray

    def __post_init__(self):
        w = _readonly(self.weights)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.axis.size,):
            raise ValueError(
                f"weights shape {w.shape} != axis {self.axis.name!r} size {self.axis.size}"
            )
        if w.min() < 0.0:
            raise ValueError("measure weights must be nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"measure weights sum to {w.sum()!r}, not 1 within {SUM_TOL}")

    @classmethod
    def uniform(cls, axis: Axis) -> "DiscreteMeasure":
        return cls(axis, np.full(axis.size, 1.0 / axis.size))

    @classmethod
    def dirac(cls, axis: Axis, at: int) -> "DiscreteMeasure":
        w = np.zeros(axis.size)
        w[at] = 1.0
        return cls(axis, w)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > SUPPORT_TOL)

    def mass(self, indices) -> float:
        return float(self.weights[np.asarray(indices, dtype=int)].sum()) if len(indices) else 0.0


@dataclass(frozen=True)
class Localization:
    """A measure localized by a [0,1] density; normalizer must be positive."""

    base: DiscreteMeasure
    density: np.ndarray
    normalizer: float = field(init=False)

    def __post_init__(self):
        theta = _readonly(self.density)
        object.__setattr__(self, "density", theta)
        if theta.shape != self.base.weights.shape:
            raise AxisMismatchError(f"density shape {theta.shape} does not match axis {self.base.axis.name!r}")
        if theta.min() < 0.0 or theta.max() > 1.0:
            raise ValueError("density entries must lie in [0,1]")
        norm = float(theta @ self.base.weights)
        if norm <= SUPPORT_TOL:
            raise DegenerateLocalizationError(
                f"localization mass {norm!r} on axis {self.base.axis.name!r} is below {SUPPORT_TOL}"
            )
        object.__setattr__(self, "normalizer", norm)

    def measure(self) -> DiscreteMeasure:
        w = self.density * self.base.weights / self.normalizer
        return DiscreteMeasure(self.base.axis, w / w.sum())


@dataclass(frozen=True)
class PartitionOfUnity:
    """Nonnegative weight vectors on one axis summing pointwise to 1.

    mode "definable" allows real weights; mode "constructible" requires exact
    {0,1} weights, which makes the pieces disjoint indicator sets.
    """

    axis: Axis
    pieces: np.ndarray  # shape (k, axis.size)
    mode: str = "definable"
    centers: tuple[int, ...] | None = None

    def __post_init__(self):
        p = _readonly(self.pieces)
        object.__setattr__(self, "pieces", p)
        if p.ndim != 2 or p.shape[1] != self.axis.size:
            raise ValueError(f"pieces shape {p.shape} incompatible with axis size {self.axis.size}")
        if self.mode not in ("definable", "constructible"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if p.size and p.min() < -SUM_TOL:
            raise ValueError("piece weights must be nonnegative")
        colsums = p.sum(axis=0)
        if np.max(np.abs(colsums - 1.0)) > SUM_TOL:
            raise ValueError("piece weights must sum pointwise to 1")
        if self.mode == "constructible":
            if not np.all((p == 0.0) | (p == 1.0)):
                raise ValueError("constructible pieces must be exactly {0,1}-valued")

    @property
    def size(self) -> int:
        return self.pieces.shape[0]

    def supports(self) -> list[np.ndarray]:
        return [np.flatnonzero(row > SUPPORT_TOL) for row in self.pieces]


@dataclass(frozen=True)
class GridPartition:
    """Product of per-axis partitions of unity; cells are factor-index tuples."""

    factors: tuple[PartitionOfUnity, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("grid needs at least one factor")

    @property
    def axes(self) -> tuple[Axis, ...]:
        return tuple(f.axis for f in self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.size for f in self.factors)

    def cells(self):
        return np.ndindex(*self.shape)

    def cell_weight(self, cell: tuple[int, ...]) -> np.ndarray:
        """Dense weight tensor of one product cell."""
        vecs = [f.pieces[c] for f, c in zip(self.factors, cell)]
        out = vecs[0]
        for v in vecs[1:]:
            out = np.multiply.outer(out, v)
        return out

    def cell_supports(self, cell: tuple[int, ...]) -> list[np.ndarray]:
        return [np.flatnonzero(f.pieces[c] > SUPPORT_TOL) for f, c in zip(self.factors, cell)]

    def cell_mass(self, cell: tuple[int, ...], mus: Sequence[DiscreteMeasure]) -> float:
        out = 1.0
        for f, c, mu in zip(self.factors, cell, mus):
            out *= float(f.pieces[c] @ mu.weights)
        return out

    def pointwise_sum(self) -> np.ndarray:
        """Sum of all cell weights at every point (should be identically 1)."""
        out = None
        for f in self.factors:
            s = f.pieces.sum(axis=0)
            out = s if out is None else np.multiply.outer(out, s)
        return out


@dataclass
class Certificate:
    """Self-contained record of a pipeline run and the bound it checks.

    verdict is pass exactly when `measured` satisfies `claimed_bound` in the
    direction `bound_kind` within `tolerance`.
    """

    pipeline: str
    input_digest: str
    parameters: dict
    witness: dict
    statistics: dict
    bound_formula: str
    claimed_bound: float | None
    measured: float | None
    bound_kind: str = "upper"  # "upper" | "lower" | "none"
    tolerance: float = SUM_TOL
    verdict: bool = True
    sweep: list | None = None
    inputs: dict | None = None
    meta: dict = field(default_factory=dict)

    def check(self) -> bool:
        if self.bound_kind == "none" or self.claimed_bound is None or self.measured is None:
            return self.verdict
        if self.bound_kind == "upper":
            return self.measured <= self.claimed_bound + self.tolerance
        if self.bound_kind == "lower":
            return self.measured >= self.claimed_bound - self.tolerance
        raise ValueError(f"unknown bound kind {self.bound_kind!r}")

    def seal(self) -> "Certificate":
        self.verdict = self.check()
        return self


def _match_axes(phi: FuzzyPredicate, mus: Sequence[DiscreteMeasure]) -> None:
    if len(mus) != phi.arity:
        raise AxisMismatchError(f"predicate has {phi.arity} axes but {len(mus)} measures given")
    for ax, mu in zip(phi.axes, mus):
        if mu.axis != ax:
            raise AxisMismatchError(
                f"axis {ax.name!r} (size {ax.size}) does not match measure axis "
                f"{mu.axis.name!r} (size {mu.axis.size})"
            )


def expectation(phi: FuzzyPredicate, mus: Sequence[DiscreteMeasure]) -> float:
    """Integral of phi against the product of one measure per axis."""
    _match_axes(phi, mus)
    letters = string.ascii_lowercase[: phi.arity]
    spec = letters + "," + ",".join(letters) + "->"
    return float(np.einsum(spec, phi.values, *[mu.weights for mu in mus]))


def morley_product(mu: DiscreteMeasure, nu: DiscreteMeasure, phi: FuzzyPredicate) -> float:
    """Iterated integral: first against mu on the rows, then nu on the columns.

    For finitely supported measures this coincides exactly with the product
    integral, hence commutes with the transposed pairing; both facts are
    asserted by tests rather than here.
    """
    if phi.arity != 2:
        raise AxisMismatchError("morley_product needs a binary predicate")
    _match_axes(phi, [mu, nu])
    inner = mu.weights @ phi.values  # F(b) = sum_a mu(a) phi(a,b)
    return float(inner @ nu.weights)


def oscillation(phi: FuzzyPredicate, supports: Sequence[Sequence[int]]) -> float:
    """max - min of phi over a product of per-axis index subsets."""
    if len(supports) != phi.arity:
        raise AxisMismatchError(f"need {phi.arity} supports, got {len(supports)}")
    idx = []
    for i, sup in enumerate(supports):
        arr = np.asarray(list(sup), dtype=int)
        if arr.size == 0:
            raise ValueError(f"empty support on axis {phi.axes[i].name!r}: homogeneity is vacuous")
        idx.append(arr)
    sub = phi.values[np.ix_(*idx)]
    return float(sub.max() - sub.min())


def localize(mu: DiscreteMeasure, theta) -> DiscreteMeasure:
    """Normalized localization of mu by the density theta."""
    return Localization(mu, np.asarray(theta, dtype=float)).measure()


def permutation_invariance_check(
    phi: FuzzyPredicate, mu: DiscreteMeasure, n: int, sigma: Sequence[int]
) -> float:
    """|E[phi(x_1..x_n)] - E[phi(x_sigma(1)..x_sigma(n))]| under the product measure.

    Tautologically 0 for product measures; kept as a numerical sanity check
    (must come out below EXACT_TOL).
    """
    if phi.arity != n:
        raise AxisMismatchError(f"predicate arity {phi.arity} != n = {n}")
    for ax in phi.axes:
        if ax != mu.axis:
            raise AxisMismatchError(f"axis {ax.name!r} differs from measure axis {mu.axis.name!r}")
    perm = tuple(sigma)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"sigma {perm} is not a permutation of 0..{n-1}")
    mus = [mu] * n
    e1 = expectation(phi, mus)
    permuted = FuzzyPredicate(phi.axes, np.transpose(phi.values, axes=perm))
    e2 = expectation(permuted, mus)
    return abs(e1 - e2)
