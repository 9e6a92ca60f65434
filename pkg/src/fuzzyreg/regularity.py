"""Homogeneous grids for sum-of-product predicates and regularity decompositions.

The structured approximation follows the two-step recipe: approximate the
column-difference predicate by a sampled tuple, partition the last axis by a
cover over that tuple, substitute per-piece representatives, and recurse on
the remaining axes with a halved budget.  All L1 errors are verified by
exhaustive summation before anything is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Axis,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    PartitionOfUnity,
    SUM_TOL,
    SUPPORT_TOL,
    expectation,
)
from .covering import cover_partition
from .sampling import eps_approximation_search


class ApproximationNotFound(RuntimeError):
    """Sampling exhausted without an approximation witness."""

    def __init__(self, message: str, best_error: float):
        super().__init__(message)
        self.best_error = best_error


@dataclass(frozen=True)
class SumOfProducts:
    """Sum over m terms of products of per-axis [0,1] factor vectors."""

    axes: tuple[Axis, ...]
    factors: tuple[np.ndarray, ...]  # one (m, axis.size) array per axis

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        mats = []
        m = None
        for ax, f in zip(self.axes, self.factors):
            arr = np.atleast_2d(np.asarray(f, dtype=float)).copy()
            if arr.shape[1] != ax.size:
                raise ValueError(f"factor shape {arr.shape} incompatible with axis {ax.name!r}")
            if m is None:
                m = arr.shape[0]
            elif arr.shape[0] != m:
                raise ValueError("all axes must carry the same number of terms")
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError("factor entries must lie in [0,1]")
            arr.flags.writeable = False
            mats.append(arr)
        object.__setattr__(self, "factors", tuple(mats))

    @property
    def terms(self) -> int:
        return self.factors[0].shape[0]

    @property
    def arity(self) -> int:
        return len(self.axes)

    def tensor(self) -> np.ndarray:
        """Dense evaluation; may exceed 1, callers clip for reporting only."""
        out = np.zeros(tuple(ax.size for ax in self.axes))
        for j in range(self.terms):
            term = self.factors[0][j]
            for f in self.factors[1:]:
                term = np.multiply.outer(term, f[j])
            out = out + term
        return out


@dataclass(frozen=True)
class StructuredApproximation:
    theta: SumOfProducts
    l1_error: float
    eps: float
    pieces_per_level: tuple[int, ...]


@dataclass(frozen=True)
class NipCertificate:
    """Grid partition with small exceptional mass and per-cell L1 regularity."""

    grid: GridPartition
    eps: float
    delta: float
    l1_error: float
    cell_masses: dict
    exceptional: tuple[tuple[int, ...], ...]
    exceptional_mass: float
    good_cells: dict  # cell -> {"r": value, "deviation": d, "mass": w, ...}
    verdict: bool

    def to_payload(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "l1_error": self.l1_error,
            "exceptional": [list(c) for c in self.exceptional],
            "exceptional_mass": self.exceptional_mass,
            "good_cells": {str(k): v for k, v in self.good_cells.items()},
            "cell_count": len(self.cell_masses),
            "verdict": self.verdict,
        }


def minimal_refinement(theta: SumOfProducts, eps: float) -> int:
    """Smallest N with m*((1 + 2/N)^n - 1) <= eps/2."""
    m, n = theta.terms, theta.arity
    target = 1.0 + eps / (2.0 * m)
    base = target ** (1.0 / n) - 1.0
    guess = max(1, math.ceil(2.0 / base)) if base > 0 else 1
    n_ref = max(1, guess - 2)
    while m * ((1.0 + 2.0 / n_ref) ** n - 1.0) > eps / 2.0:
        n_ref += 1
    return n_ref


def _tent(values: np.ndarray, k: int, n_ref: int) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(n_ref * values - k))


def _axis_partition(
    factors: np.ndarray, n_ref: int, axis: Axis, mode: str
) -> PartitionOfUnity:
    """Refine one axis so every factor varies by at most 2/N on each piece."""
    m, size = factors.shape
    if mode == "constructible":
        sig = np.minimum(np.floor(n_ref * factors).astype(int), n_ref)
        groups: dict[tuple[int, ...], list[int]] = {}
        for x in range(size):
            groups.setdefault(tuple(sig[:, x]), []).append(x)
        pieces = np.zeros((len(groups), size))
        for row, key in enumerate(sorted(groups)):
            pieces[row, groups[key]] = 1.0
        return PartitionOfUnity(axis, pieces, "constructible")
    if mode == "definable":
        weights: dict[tuple[int, ...], np.ndarray] = {}
        for x in range(size):
            active: list[list[tuple[int, float]]] = []
            for j in range(m):
                t = factors[j, x] * n_ref
                ks = {int(math.floor(t)), int(math.ceil(t))}
                opts = []
                for k in sorted(ks):
                    k = min(max(k, 0), n_ref)
                    w = max(0.0, 1.0 - abs(t - k))
                    if w > 0.0:
                        opts.append((k, w))
                active.append(opts)
            combos = [((), 1.0)]
            for opts in active:
                combos = [(sig + (k,), w * wk) for sig, w in combos for k, wk in opts]
            for sig, w in combos:
                if w <= 0.0:
                    continue
                vec = weights.setdefault(sig, np.zeros(size))
                vec[x] += w
        pieces = np.stack([weights[key] for key in sorted(weights)])
        return PartitionOfUnity(axis, pieces, "definable")
    raise ValueError(f"unknown mode {mode!r}")


def homogeneous_grid(theta: SumOfProducts, eps: float, mode: str = "constructible") -> GridPartition:
    """Grid partition on which theta oscillates by at most eps per cell.

    Buckets every factor into intervals of width 1/N (constructible) or into
    overlapping tents of width 2/N (definable), N chosen minimally for the
    term-count inequality; homogeneity of every cell is verified before return.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n_ref = minimal_refinement(theta, eps)
    factors = [
        _axis_partition(theta.factors[i], n_ref, theta.axes[i], mode)
        for i in range(theta.arity)
    ]
    grid = GridPartition(tuple(factors))
    tensor = theta.tensor()
    for cell in grid.cells():
        sups = grid.cell_supports(cell)
        if any(s.size == 0 for s in sups):
            continue
        sub = tensor[np.ix_(*sups)]
        if float(sub.max() - sub.min()) > eps + SUM_TOL:
            raise AssertionError(f"cell {cell} oscillates by {sub.max() - sub.min()} > eps={eps}")
    return grid


def _flatten_axes(phi: FuzzyPredicate) -> FuzzyPredicate:
    """View an n-ary predicate as binary: (product of leading axes) x last axis."""
    lead = int(np.prod([ax.size for ax in phi.axes[:-1]]))
    flat = phi.values.reshape(lead, phi.axes[-1].size)
    ax = Axis("*".join(a.name for a in phi.axes[:-1]), lead)
    return FuzzyPredicate((ax, phi.axes[-1]), flat)


def _product_measure(mus: Sequence[DiscreteMeasure], axis: Axis) -> DiscreteMeasure:
    w = mus[0].weights
    for mu in mus[1:]:
        w = np.multiply.outer(w, mu.weights)
    return DiscreteMeasure(axis, w.ravel())


def _column_difference_predicate(flat: FuzzyPredicate) -> FuzzyPredicate:
    """chi(x; (b, b')) = |phi(x; b) - phi(x; b')| on the flattened pair axis."""
    vals = flat.values
    chi = np.abs(vals[:, :, None] - vals[:, None, :]).reshape(vals.shape[0], -1)
    pair_axis = Axis(flat.axes[1].name + "^2", chi.shape[1])
    return FuzzyPredicate((flat.axes[0], pair_axis), chi)


def _binary_step(
    flat: FuzzyPredicate,
    mu_lead: DiscreteMeasure,
    eps: float,
    seed: int,
    max_attempts: int,
) -> tuple[PartitionOfUnity, list[int]]:
    """Partition of the last axis plus one representative column per piece.

    Pieces are homogeneous at eps/2 against an eps/2-approximation tuple, so
    substituting any positive-weight representative costs at most eps in L1
    against mu_lead, uniformly in the column.
    """
    chi = _column_difference_predicate(flat)
    # sufficient tuple size; capped so tiny budgets fail explicitly, not by OOM
    n = min(math.ceil(9.0 / (2.0 * (eps / 2.0) ** 2)), 4_000_000)
    witness = eps_approximation_search(chi, mu_lead, eps / 2.0, n, max_attempts, seed)
    if not witness.found:
        raise ApproximationNotFound(
            f"no {eps/2}-approximation tuple found in {max_attempts} attempts "
            f"(best error {witness.worst_error})",
            witness.worst_error,
        )
    partition = cover_partition(flat.transpose(), set(witness.elements), eps / 2.0, "definable")
    reps: list[int] = []
    for piece in partition.pieces:
        idx = np.flatnonzero(piece > SUPPORT_TOL)
        reps.append(int(idx[np.argmax(piece[idx])]))  # heaviest weight, lowest index ties
    return partition, reps


def structured_approximation(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    seed: int = 0,
    max_attempts: int = 64,
) -> StructuredApproximation:
    """Approximate phi in L1(product of mus) by a sum of products, error <= eps.

    Binary case: one partition/representative step.  Higher arity: partition
    the last axis at eps/2, then recurse on each representative slice at
    eps/2.  The resulting L1 error is verified exhaustively and asserted.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if len(mus) != phi.arity:
        raise ValueError("one measure per axis required")

    def build(p: FuzzyPredicate, ms: Sequence[DiscreteMeasure], budget: float, lvl: int):
        if p.arity == 1:
            return SumOfProducts(p.axes, (p.values[None, :],)), []
        flat = _flatten_axes(p)
        mu_lead = _product_measure(ms[:-1], flat.axes[0])
        inner = budget if p.arity == 2 else budget / 2.0
        partition, reps = _binary_step(flat, mu_lead, inner, seed + 7919 * lvl, max_attempts)
        sizes = [partition.size]
        if p.arity == 2:
            lead_factors = p.values[:, reps].T  # one term per piece
            return SumOfProducts(p.axes, (lead_factors, partition.pieces)), sizes
        term_lead: list[list[np.ndarray]] = [[] for _ in range(p.arity - 1)]
        term_last: list[np.ndarray] = []
        for piece_row, rep in zip(partition.pieces, reps):
            slice_pred = FuzzyPredicate(p.axes[:-1], np.take(p.values, rep, axis=p.arity - 1))
            sub, sub_sizes = build(slice_pred, ms[:-1], budget / 2.0, lvl + 1)
            sizes.extend(sub_sizes)
            for j in range(sub.terms):
                for i in range(p.arity - 1):
                    term_lead[i].append(sub.factors[i][j])
                term_last.append(piece_row)
        factors = tuple(np.stack(term_lead[i]) for i in range(p.arity - 1)) + (np.stack(term_last),)
        return SumOfProducts(p.axes, factors), sizes

    theta, sizes = build(phi, list(mus), eps, 0)
    diff = FuzzyPredicate(phi.axes, np.clip(np.abs(phi.values - theta.tensor()), 0.0, 1.0))
    l1 = expectation(diff, mus)
    if l1 > eps + SUM_TOL:
        raise AssertionError(f"structured approximation error {l1} exceeds eps={eps}")
    return StructuredApproximation(theta, l1, eps, tuple(sizes))


def nip_regularity(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    mode: str = "constructible",
    seed: int = 0,
) -> NipCertificate:
    """Regularity decomposition: small exceptional mass, near-constant good cells.

    Runs the structured approximation at delta^2, refines it into an
    eps-homogeneous grid, and marks cells whose weighted deviation from the
    approximation exceeds delta as exceptional; their joint mass is at most
    delta by Markov.  Good cells check the per-cell inequality at eps
    directly, and the proof-form slack (deviation beyond eps/2 vs delta) is
    recorded alongside.
    """
    if eps <= 0 or delta <= 0:
        raise ValueError("eps and delta must be positive")
    sa = structured_approximation(phi, mus, delta * delta, seed=seed)
    grid = homogeneous_grid(sa.theta, eps, mode)
    theta_tensor = sa.theta.tensor()
    diff = np.abs(phi.values - theta_tensor)

    import string

    letters = string.ascii_lowercase[: phi.arity]
    spec = letters + "," + ",".join(letters) + "->"

    def weighted(tensor: np.ndarray, cell) -> float:
        weight_vecs = [f.pieces[c] * mu.weights for f, c, mu in zip(grid.factors, cell, mus)]
        return float(np.einsum(spec, tensor, *weight_vecs))

    cell_masses: dict[tuple[int, ...], float] = {}
    exceptional: list[tuple[int, ...]] = []
    good: dict[tuple[int, ...], dict] = {}
    total_l1 = expectation(FuzzyPredicate(phi.axes, np.clip(diff, 0, 1)), mus)
    markov_sum = 0.0
    for cell in grid.cells():
        mass = grid.cell_mass(cell, mus)
        cell_masses[cell] = mass
        if mass <= SUPPORT_TOL:
            continue
        dev_theta = weighted(diff, cell)
        markov_sum += dev_theta
        if dev_theta / mass > delta:
            exceptional.append(cell)
            continue
        sups = grid.cell_supports(cell)
        sub = theta_tensor[np.ix_(*sups)]
        r_d = float((sub.min() + sub.max()) / 2.0)
        dev = weighted(np.abs(phi.values - r_d), cell)
        proof_form = weighted(np.maximum(np.abs(phi.values - r_d) - eps / 2.0, 0.0), cell)
        good[cell] = {
            "r": r_d,
            "mass": mass,
            "deviation": dev,
            "bound": eps * mass,
            "definition_ok": dev <= eps * mass + SUM_TOL,
            "proof_form_slack": proof_form,
            "proof_form_ok": proof_form <= delta + SUM_TOL,
        }
    if abs(markov_sum - total_l1) > SUM_TOL:
        raise AssertionError(f"Markov identity violated: {markov_sum} vs {total_l1}")
    exc_mass = float(sum(cell_masses[c] for c in exceptional))
    verdict = exc_mass <= delta + SUM_TOL and all(v["definition_ok"] for v in good.values())
    return NipCertificate(
        grid=grid,
        eps=eps,
        delta=delta,
        l1_error=sa.l1_error,
        cell_masses=cell_masses,
        exceptional=tuple(exceptional),
        exceptional_mass=exc_mass,
        good_cells=good,
        verdict=verdict,
    )


@dataclass(frozen=True)
class Sandwich:
    lower_coeffs: dict
    upper_coeffs: dict
    chi_minus: np.ndarray
    chi_plus: np.ndarray
    gap: float


def sandwich_build(
    phi: FuzzyPredicate, grid: GridPartition, mus: Sequence[DiscreteMeasure]
) -> Sandwich:
    """Cell-wise inf/sup envelopes of phi and their integral gap.

    chi- <= phi <= chi+ pointwise (verified); the gap under the product
    measure is the executable weak-orthogonality criterion.
    """
    if tuple(grid.axes) != tuple(phi.axes):
        raise ValueError("grid axes do not cover the predicate axes")
    shape = phi.values.shape
    chi_minus = np.zeros(shape)
    chi_plus = np.zeros(shape)
    lower: dict[tuple[int, ...], float] = {}
    upper: dict[tuple[int, ...], float] = {}
    for cell in grid.cells():
        sups = grid.cell_supports(cell)
        if any(s.size == 0 for s in sups):
            continue
        sub = phi.values[np.ix_(*sups)]
        r_minus, r_plus = float(sub.min()), float(sub.max())
        lower[cell], upper[cell] = r_minus, r_plus
        weight = grid.cell_weight(cell)
        chi_minus = chi_minus + r_minus * weight
        chi_plus = chi_plus + r_plus * weight
    if np.any(chi_minus > phi.values + SUM_TOL) or np.any(chi_plus < phi.values - SUM_TOL):
        raise AssertionError("sandwich envelopes fail pointwise bracketing")
    gap_tensor = np.clip(chi_plus - chi_minus, 0.0, 1.0)
    gap = expectation(FuzzyPredicate(phi.axes, gap_tensor), mus)
    return Sandwich(lower, upper, chi_minus, chi_plus, gap)
