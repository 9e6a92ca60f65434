"""l-infinity covering numbers and cover-induced homogeneous partitions.

Two directional readings of the covering number are provided: covering the
rows of a binary predicate restricted to a column subset, and covering the
column image restricted to a row subset.  Pipelines pick the direction their
bound requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .core import FuzzyPredicate, PartitionOfUnity
from .rng import stream_rng

EXACT_SUBSET_LIMIT = 10**6  # max subsets enumerated in exact mode
EXACT_VECTOR_LIMIT = 20  # max distinct vectors for the minimal-cover search
COVER_TOL = 1e-12

ROWS = "rows"  # cover row vectors restricted to a column subset
COLUMNS = "columns"  # cover column vectors restricted to a row subset


@dataclass(frozen=True)
class CoverResult:
    """Greedy cover of a finite vector family at l-infinity radius eps."""

    center_indices: tuple[int, ...]
    radius: float
    direction: str | None
    assignment: np.ndarray  # nearest center (position in center_indices) per vector
    covered: np.ndarray  # per-vector flag: within radius of some center

    @property
    def size(self) -> int:
        return len(self.center_indices)


def _linf(vectors: np.ndarray, center: np.ndarray) -> np.ndarray:
    if vectors.shape[1] == 0:
        return np.zeros(len(vectors))
    return np.max(np.abs(vectors - center), axis=1)


def linf_cover(vectors, eps: float, direction: str | None = None) -> CoverResult:
    """Greedy farthest-point cover with centers drawn from the input vectors.

    Deterministic: starts at index 0 and breaks all ties towards the lowest
    index.  Every input ends within distance eps of a returned center.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    m = vecs.shape[0] if vecs.size else 0
    if m == 0:
        return CoverResult((), eps, direction, np.zeros(0, dtype=int), np.zeros(0, dtype=bool))
    centers = [0]
    dist = _linf(vecs, vecs[0])
    assign = np.zeros(m, dtype=int)
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= eps + COVER_TOL:
            break
        centers.append(far)
        d_new = _linf(vecs, vecs[far])
        closer = d_new < dist
        assign[closer] = len(centers) - 1
        dist = np.minimum(dist, d_new)
    covered = dist <= eps + COVER_TOL
    return CoverResult(tuple(centers), eps, direction, assign, covered)


def _coverable(vecs: np.ndarray, members: tuple[int, ...], two_eps: float) -> bool:
    sub = vecs[list(members)]
    if sub.shape[1] == 0:
        return True
    return float(np.max(sub.max(axis=0) - sub.min(axis=0))) <= two_eps + COVER_TOL


def minimal_cover_size(vectors, eps: float) -> int:
    """Smallest number of free-center l-infinity balls of radius eps covering the vectors.

    Centers range over the ambient cube, so a set is coverable by one ball
    exactly when its per-coordinate spread is at most 2*eps.  Exhaustive
    branch-and-bound; intended for small families (<= EXACT_VECTOR_LIMIT
    distinct vectors).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vecs.size == 0:
        return 0
    vecs = np.unique(vecs, axis=0)
    m = len(vecs)
    if m > EXACT_VECTOR_LIMIT:
        raise ValueError(f"minimal cover search limited to {EXACT_VECTOR_LIMIT} distinct vectors, got {m}")
    two_eps = 2.0 * eps

    def maximal_sets_containing(v: int, pool: tuple[int, ...]) -> list[frozenset]:
        found: list[frozenset] = []

        def grow(current: tuple[int, ...], candidates: tuple[int, ...]):
            extended = False
            for k, u in enumerate(candidates):
                if _coverable(vecs, current + (u,), two_eps):
                    extended = True
                    grow(current + (u,), candidates[k + 1 :])
            if not extended:
                s = frozenset(current)
                if not any(s < t for t in found):
                    found[:] = [t for t in found if not t < s]
                    found.append(s)

        grow((v,), tuple(u for u in pool if u != v))
        return found

    best = [m]  # singletons always work

    def search(uncovered: frozenset, used: int):
        if used >= best[0]:
            return
        if not uncovered:
            best[0] = used
            return
        v = min(uncovered)
        for s in maximal_sets_containing(v, tuple(sorted(uncovered))):
            search(uncovered - s, used + 1)

    search(frozenset(range(m)), 0)
    return best[0]


def _directed_matrix(phi: FuzzyPredicate, direction: str) -> np.ndarray:
    if phi.arity != 2:
        raise ValueError("covering numbers are defined for binary predicates")
    if direction == ROWS:
        return phi.values
    if direction == COLUMNS:
        return phi.values.T
    raise ValueError(f"unknown direction {direction!r}")


def covering_number(
    phi: FuzzyPredicate,
    eps: float,
    n: int,
    direction: str = COLUMNS,
    mode: str = "exact",
    samples: int = 64,
    seed: int = 0,
) -> int:
    """Worst-case cover size of the restricted vector family over n-point parameter sets.

    exact mode enumerates all n-element coordinate subsets (gated by
    EXACT_SUBSET_LIMIT) and uses the minimal free-center cover when few
    distinct vectors remain, greedy otherwise.  greedy mode samples subsets
    and reports the max greedy cover size, an upper-bound estimate.

    Restricting to more coordinates than exist cannot change l-infinity
    distances, so n saturates at the opposing axis size (parameter multisets
    add repeated coordinates only).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    mat = _directed_matrix(phi, direction)
    n_coords = mat.shape[1]
    k = min(n, n_coords)

    def cover_size(cols: tuple[int, ...], exact: bool) -> int:
        sub = mat[:, list(cols)]
        distinct = np.unique(sub, axis=0)
        if exact and len(distinct) <= EXACT_VECTOR_LIMIT:
            return minimal_cover_size(distinct, eps)
        return linf_cover(distinct, eps).size

    if mode == "exact":
        if comb(n_coords, k) > EXACT_SUBSET_LIMIT:
            raise ValueError(
                f"exact mode would enumerate {comb(n_coords, k)} subsets (> {EXACT_SUBSET_LIMIT}); use greedy"
            )
        return max(cover_size(c, True) for c in combinations(range(n_coords), k))
    if mode == "greedy":
        if comb(n_coords, k) <= samples:
            subsets = list(combinations(range(n_coords), k))
        else:
            rng = stream_rng(seed, 0)
            subsets = [tuple(sorted(rng.choice(n_coords, size=k, replace=False))) for _ in range(samples)]
        return max(cover_size(c, False) for c in subsets)
    raise ValueError(f"unknown mode {mode!r}")


def cover_partition(
    phi: FuzzyPredicate, B, eps: float, mode: str = "definable"
) -> PartitionOfUnity:
    """Partition of unity on the row axis whose pieces are homogeneous against B.

    definable mode: centers from a greedy cover at radius 0.49*eps; piece i is
    theta_i / sum_j theta_j with theta_i(x) = max(0, eps/2 - max_{b in B}
    |phi(x;b) - phi(a_i;b)|).  constructible mode: centers at radius eps/2 and
    piece i is X_i minus earlier X_j, X_i the closed eps/2-ball around center i.
    Either way each piece support oscillates by at most eps against every b in B.
    """
    if phi.arity != 2:
        raise ValueError("cover_partition needs a binary predicate")
    if eps <= 0:
        raise ValueError("eps must be positive")
    cols = np.asarray(sorted(set(int(b) for b in B)), dtype=int)
    if cols.size == 0:
        raise ValueError("B must be nonempty")
    if cols.min() < 0 or cols.max() >= phi.axes[1].size:
        raise ValueError(f"B references unknown elements of axis {phi.axes[1].name!r}")
    rows = phi.values[:, cols]
    if mode == "definable":
        cov = linf_cover(rows, 0.49 * eps, ROWS)
        dists = np.stack([_linf(rows, rows[c]) for c in cov.center_indices])
        theta = np.maximum(0.0, eps / 2.0 - dists)
        totals = theta.sum(axis=0)
        # every row is within 0.49*eps of a center, so totals >= 0.01*eps > 0
        pieces = theta / totals
        return PartitionOfUnity(phi.axes[0], pieces, "definable", centers=cov.center_indices)
    if mode == "constructible":
        cov = linf_cover(rows, eps / 2.0, ROWS)
        dists = np.stack([_linf(rows, rows[c]) for c in cov.center_indices])
        balls = dists <= eps / 2.0 + COVER_TOL
        taken = np.zeros(rows.shape[0], dtype=bool)
        pieces = np.zeros_like(dists)
        keep = []
        for i in range(balls.shape[0]):
            piece = balls[i] & ~taken
            if piece.any():
                pieces[i, piece] = 1.0
                keep.append(i)
            taken |= balls[i]
        centers = tuple(cov.center_indices[i] for i in keep)
        return PartitionOfUnity(phi.axes[0], pieces[keep], "constructible", centers=centers)
    raise ValueError(f"unknown mode {mode!r}")


def partition_homogeneity(phi: FuzzyPredicate, partition: PartitionOfUnity, B) -> float:
    """Worst oscillation of any piece support against any parameter in B."""
    cols = np.asarray(sorted(set(int(b) for b in B)), dtype=int)
    worst = 0.0
    for sup in partition.supports():
        if sup.size == 0:
            continue
        sub = phi.values[np.ix_(sup, cols)]
        worst = max(worst, float(np.max(sub.max(axis=0) - sub.min(axis=0))))
    return worst
