"""Homogeneous rectangle extraction, iterative box partitions, cuttings, equipartitions.

The iterative partition keeps a list of axis-aligned boxes tiling the full
product.  Each round queries a rectangle oracle on the measures localized to
every live box and replaces the box with the staircase pieces
prod_{i<j}(A_i ∩ B_i) x (A_j \\ B_j) x prod_{i>j} A_i for j = 1..n plus
prod_i (A_i ∩ B_i); the last piece is homogeneous by the oracle's contract.
Oracle queries within a round may run concurrently (capped by FR_THREADS);
splits are applied in deterministic box order afterwards.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np

from .certificates import make_certificate
from .core import (
    Certificate,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    PartitionOfUnity,
    SUM_TOL,
    SUPPORT_TOL,
    expectation,
    localize,
    oscillation,
)
from .covering import cover_partition
from .sampling import eps_net_search

DEFAULT_BUDGET = 10**6
SUBSET_AXIS_LIMIT = 12  # below this size, candidate subsets are exhaustive


class OracleFailure(RuntimeError):
    """The rectangle oracle failed on a positive-mass box."""


class DensityExtractionError(RuntimeError):
    """No cell meets the density extraction bound (invalid input certificate)."""


class CuttingConstructionError(RuntimeError):
    """The cutting pipeline could not complete."""


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("FR_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SehRectangle:
    """Per-axis subsets that are jointly homogeneous and individually heavy."""

    subsets: tuple[tuple[int, ...], ...]
    masses: tuple[float, ...]
    oscillation: float
    eps: float
    delta: float

    def to_payload(self) -> dict:
        return {
            "subsets": [list(s) for s in self.subsets],
            "masses": list(self.masses),
            "oscillation": self.oscillation,
            "eps": self.eps,
            "delta": self.delta,
        }


def verified_rectangle(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    subsets: Sequence[Sequence[int]],
    eps: float,
    delta: float,
) -> SehRectangle:
    """Re-verify both defining inequalities before constructing the rectangle."""
    subs = tuple(tuple(sorted(int(i) for i in s)) for s in subsets)
    osc = oscillation(phi, subs)
    masses = tuple(mu.mass(s) for mu, s in zip(mus, subs))
    if osc > eps + SUM_TOL:
        raise ValueError(f"rectangle oscillates by {osc} > eps={eps}")
    if any(m < delta - SUM_TOL for m in masses):
        raise ValueError(f"rectangle masses {masses} fall below delta={delta}")
    return SehRectangle(subs, masses, osc, eps, delta)


@dataclass(frozen=True)
class SehSearchOutcome:
    rectangle: SehRectangle | None
    exhaustive: bool  # searched every candidate vs. budget ran out
    candidates_examined: int


def _axis_candidates(
    phi: FuzzyPredicate, axis: int, support: np.ndarray, eps: float
) -> list[tuple[int, ...]]:
    """Candidate subsets for one axis: all subsets when small, level sets otherwise."""
    elems = [int(i) for i in support]
    if len(elems) == 0:
        return []
    if len(elems) <= SUBSET_AXIS_LIMIT:
        out = []
        for r in range(1, len(elems) + 1):
            out.extend(combinations(elems, r))
        return out
    cands: set[tuple[int, ...]] = {tuple(elems)}
    moved = np.moveaxis(phi.values, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    buckets = max(1, math.ceil(2.0 / eps)) if eps > 0 else 0
    for col in range(flat.shape[1]):
        vals = flat[:, col]
        if buckets == 0:
            levels = [np.flatnonzero(vals == v) for v in np.unique(vals)]
        else:
            idx = np.minimum(np.floor(vals * buckets).astype(int), buckets - 1)
            levels = [np.flatnonzero(idx == j) for j in np.unique(idx)]
        for lev in levels:
            sub = tuple(sorted(set(int(i) for i in lev) & set(elems)))
            if sub:
                cands.add(sub)
    return sorted(cands)


def seh_bruteforce(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    budget: int = DEFAULT_BUDGET,
) -> SehSearchOutcome:
    """First rectangle, in decreasing product-mass order, with heavy homogeneous sides.

    Candidates per axis are every subset of the measure support for axes of
    size <= 12, and level-set slices otherwise; rectangles are checked in
    decreasing product-mass order with lexicographic tie-breaking.
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    n = phi.arity
    per_axis = []
    for i in range(n):
        support = np.flatnonzero(mus[i].weights > SUPPORT_TOL)
        cands = _axis_candidates(phi, i, support, eps)
        scored = sorted(
            ((mus[i].mass(c), c) for c in cands), key=lambda t: (-t[0], t[1])
        )
        scored = [(m, c) for m, c in scored if m >= delta - SUM_TOL]
        per_axis.append(scored)
    if any(not s for s in per_axis):
        return SehSearchOutcome(None, True, 0)
    tuples = sorted(
        product(*per_axis),
        key=lambda combo: (-math.prod(m for m, _ in combo), tuple(c for _, c in combo)),
    )
    examined = 0
    for combo in tuples:
        if examined >= budget:
            return SehSearchOutcome(None, False, examined)
        examined += 1
        subsets = [c for _, c in combo]
        if oscillation(phi, subsets) <= eps + SUM_TOL:
            rect = verified_rectangle(phi, mus, subsets, eps, delta)
            return SehSearchOutcome(rect, True, examined)
    return SehSearchOutcome(None, True, examined)


@dataclass(frozen=True)
class BruteForceSehOracle:
    """Rectangle oracle backed by the brute-force search at fixed (eps, delta/2)."""

    eps: float
    delta: float
    budget: int = DEFAULT_BUDGET

    def __call__(
        self, phi: FuzzyPredicate, mus: Sequence[DiscreteMeasure]
    ) -> SehRectangle | None:
        return seh_bruteforce(phi, mus, self.eps, self.delta / 2.0, self.budget).rectangle


Box = tuple[tuple[int, ...], ...]


@dataclass
class DistalPartitionCertificate:
    """Box partition with per-box homogeneity verdicts and a round ledger."""

    phi_axes: tuple
    eps: float
    gamma: float
    oracle_delta: float
    boxes: list  # Box
    homogeneous: list  # bool per box
    masses: list  # float per box
    rounds_budget: int
    rounds_used: int
    round_ledger: list  # per round: {"round", "queried", "split", "uncovered_mass"}
    nonhomogeneous_mass: float
    cell_bound: float
    oracle_failures: list
    constant_recurrence: float  # -log(n+1)/log(1-(delta/2)^n)
    constant_stated: float | None  # -log(n+1)/log(1-delta^n), None when degenerate
    verdict: bool = False
    note: str = (
        "round budget uses the (delta/2)^n coverage recurrence; the alternative "
        "delta^n constant is reported for comparison"
    )

    def to_payload(self) -> dict:
        return {
            "eps": self.eps,
            "gamma": self.gamma,
            "oracle_delta": self.oracle_delta,
            "boxes": [[list(side) for side in box] for box in self.boxes],
            "homogeneous": list(self.homogeneous),
            "masses": list(self.masses),
            "rounds_budget": self.rounds_budget,
            "rounds_used": self.rounds_used,
            "round_ledger": self.round_ledger,
            "nonhomogeneous_mass": self.nonhomogeneous_mass,
            "cell_bound": self.cell_bound,
            "oracle_failures": self.oracle_failures,
            "constant_recurrence": self.constant_recurrence,
            "constant_stated": self.constant_stated,
            "verdict": self.verdict,
            "note": self.note,
        }


def _box_mass(box: Box, mus: Sequence[DiscreteMeasure]) -> float:
    return math.prod(mu.mass(side) for mu, side in zip(mus, box))


def _staircase(box: Box, rect: SehRectangle) -> list[Box]:
    """Partition a box into the n staircase pieces plus the homogeneous core."""
    n = len(box)
    pieces: list[Box] = []
    bs = [set(s) for s in rect.subsets]
    for j in range(n):
        sides = []
        empty = False
        for i in range(n):
            if i < j:
                side = tuple(sorted(set(box[i]) & bs[i]))
            elif i == j:
                side = tuple(sorted(set(box[i]) - bs[i]))
            else:
                side = box[i]
            if not side:
                empty = True
                break
            sides.append(side)
        if not empty:
            pieces.append(tuple(sides))
    core = tuple(tuple(sorted(set(box[i]) & bs[i])) for i in range(n))
    if all(core):
        pieces.append(core)
    return pieces


def distal_partition(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    gamma: float,
    oracle: Callable[[FuzzyPredicate, Sequence[DiscreteMeasure]], SehRectangle | None],
    oracle_delta: float | None = None,
) -> DistalPartitionCertificate:
    """Iterate the rectangle oracle until non-homogeneous mass is at most gamma.

    The oracle receives phi with the measures localized to the current box and
    must return a rectangle whose localized per-axis masses are at least
    delta/2 (its own contract), or None.  Zero-mass boxes are frozen and never
    queried; an oracle failure on a positive-mass box is recorded as a hard
    failure in the certificate.
    """
    n = phi.arity
    delta = oracle_delta if oracle_delta is not None else getattr(oracle, "delta")
    shrink = 1.0 - (delta / 2.0) ** n
    if gamma >= 1.0:
        budget = 0
    else:
        budget = max(0, math.ceil(math.log(gamma) / math.log(shrink)))
    const_rec = -math.log(n + 1) / math.log(shrink)
    stated_base = 1.0 - delta**n
    const_stated = (
        -math.log(n + 1) / math.log(stated_base) if 0.0 < stated_base < 1.0 else None
    )

    full: Box = tuple(tuple(range(ax.size)) for ax in phi.axes)
    boxes: list[Box] = [full]
    failures: list[dict] = []
    ledger: list[dict] = []

    def is_homog(box: Box) -> bool:
        return oscillation(phi, box) <= eps + SUM_TOL

    homog = {full: is_homog(full)}
    rounds_used = 0
    for rnd in range(1, budget + 1):
        live = [
            b
            for b in boxes
            if not homog[b] and _box_mass(b, mus) > SUPPORT_TOL
        ]
        if not live or failures:
            break
        live.sort(key=lambda b: (-_box_mass(b, mus), b))
        rounds_used = rnd

        def query(box: Box):
            local = [
                localize(mu, np.isin(np.arange(mu.axis.size), side).astype(float))
                for mu, side in zip(mus, box)
            ]
            return oracle(phi, local)

        cap = _thread_cap()
        if cap > 1 and len(live) > 1:
            with ThreadPoolExecutor(max_workers=cap) as pool:
                results = list(pool.map(query, live))
        else:
            results = [query(box) for box in live]

        split_count = 0
        for box, rect in zip(live, results):
            if rect is None:
                failures.append({"round": rnd, "box": [list(s) for s in box]})
                continue
            boxes.remove(box)
            homog.pop(box)
            for piece in _staircase(box, rect):
                boxes.append(piece)
                homog[piece] = is_homog(piece)
            split_count += 1
        uncovered = sum(_box_mass(b, mus) for b in boxes if not homog[b])
        ledger.append(
            {
                "round": rnd,
                "queried": len(live),
                "split": split_count,
                "uncovered_mass": uncovered,
            }
        )

    nonhomog = float(
        sum(_box_mass(b, mus) for b in boxes if not homog[b])
    )
    cell_bound = float((n + 1) ** budget)
    cert = DistalPartitionCertificate(
        phi_axes=phi.axes,
        eps=eps,
        gamma=gamma,
        oracle_delta=delta,
        boxes=sorted(boxes),
        homogeneous=[homog[b] for b in sorted(boxes)],
        masses=[_box_mass(b, mus) for b in sorted(boxes)],
        rounds_budget=budget,
        rounds_used=rounds_used,
        round_ledger=ledger,
        nonhomogeneous_mass=nonhomog,
        cell_bound=cell_bound,
        oracle_failures=failures,
        constant_recurrence=const_rec,
        constant_stated=const_stated,
    )
    cert.verdict = (
        not failures and nonhomog <= gamma + SUM_TOL and len(boxes) <= cell_bound
    )
    return cert


def density_seh(
    phi: FuzzyPredicate,
    partition: DistalPartitionCertificate,
    mus: Sequence[DiscreteMeasure],
    alpha: float,
    beta: float,
) -> SehRectangle:
    """Extract a dense homogeneous cell when the integral of phi is large.

    Requires expectation(phi) >= alpha > beta + delta + eps with delta the
    partition's non-homogeneity bound; returns a homogeneous cell on whose
    box phi stays >= beta with every per-axis mass >= (alpha-beta-delta-eps)/K.
    """
    delta = partition.gamma
    eps = partition.eps
    if alpha <= beta + delta + eps:
        raise ValueError(f"need alpha > beta + delta + eps, got {alpha} <= {beta + delta + eps}")
    total = expectation(phi, mus)
    if total < alpha - SUM_TOL:
        raise ValueError(f"expectation {total} is below alpha={alpha}")
    k_cells = len(partition.boxes)
    threshold = (alpha - beta - delta - eps) / k_cells
    order = sorted(
        range(k_cells), key=lambda i: (-partition.masses[i], partition.boxes[i])
    )
    for i in order:
        if not partition.homogeneous[i]:
            continue
        box = partition.boxes[i]
        sub = phi.values[np.ix_(*[np.asarray(side) for side in box])]
        if float(sub.min()) < beta - SUM_TOL:
            continue
        masses = [mu.mass(side) for mu, side in zip(mus, box)]
        if all(m >= threshold - SUM_TOL for m in masses):
            return SehRectangle(
                tuple(tuple(side) for side in box),
                tuple(masses),
                float(sub.max() - sub.min()),
                eps,
                threshold,
            )
    raise DensityExtractionError(
        f"no homogeneous cell with phi >= {beta} and per-axis mass >= {threshold}; "
        "the input certificate does not satisfy its claimed bounds"
    )


def bucket_identity_defect(phi: FuzzyPredicate, s: int) -> float:
    """Worst |sum_j max(0, 1/s - |v - j/s|) - 1/s| over all entries of phi."""
    v = phi.values[..., None]
    j = np.arange(s + 1) / s
    sums = np.maximum(0.0, 1.0 / s - np.abs(v - j)).sum(axis=-1)
    return float(np.max(np.abs(sums - 1.0 / s)))


def _default_density_oracle(
    phi_j: FuzzyPredicate, mus: Sequence[DiscreteMeasure], alpha: float
) -> SehRectangle:
    beta = alpha / 4.0
    inner = alpha / 8.0
    oracle = BruteForceSehOracle(eps=inner, delta=0.5)
    part = distal_partition(phi_j, mus, inner, inner, oracle)
    if not part.verdict:
        raise OracleFailure("default density oracle: distal partition failed")
    return density_seh(phi_j, part, mus, alpha, beta)


def bucketed_seh(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    s: int,
    density_oracle: Callable[[FuzzyPredicate, Sequence[DiscreteMeasure], float], SehRectangle]
    | None = None,
) -> SehRectangle:
    """Rectangle with phi-oscillation at most 2/s via value bucketing.

    Builds the bucket predicates phi_j = max(0, 1/s - |phi - j/s|), whose
    pointwise sum is exactly 1/s (asserted to 1e-12), picks a bucket with
    expectation at least 1/(s(s+1)), and extracts a dense cell on it; on that
    cell phi_j stays positive, pinning phi within 2/s.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    defect = bucket_identity_defect(phi, s)
    if defect > 1e-12:
        raise AssertionError(f"bucket partition identity defect {defect} > 1e-12")
    alpha = 1.0 / (s * (s + 1))
    oracle = density_oracle or _default_density_oracle
    chosen = None
    for j in range(s + 1):
        vals = np.maximum(0.0, 1.0 / s - np.abs(phi.values - j / s))
        phi_j = FuzzyPredicate(phi.axes, vals)
        if expectation(phi_j, mus) >= alpha - SUM_TOL:
            chosen = (j, phi_j)
            break
    if chosen is None:
        raise AssertionError("no bucket reaches the average 1/(s(s+1)); identity violated")
    j, phi_j = chosen
    rect = oracle(phi_j, mus, alpha)
    osc = oscillation(phi, rect.subsets)
    if osc > 2.0 / s + SUM_TOL:
        raise AssertionError(f"bucketed rectangle oscillates by {osc} > 2/s")
    return SehRectangle(rect.subsets, rect.masses, osc, 2.0 / s, rect.delta)


@dataclass(frozen=True)
class Cutting:
    """A weighted family covering the row axis, each piece homogeneous off a small set."""

    pieces: np.ndarray  # (D, rows) weights psi(x; d)
    gamma: float
    eps: float
    delta: float
    centers: tuple[int, ...] = ()
    net: tuple[int, ...] = ()

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.pieces, dtype=float)).copy()
        p.flags.writeable = False
        object.__setattr__(self, "pieces", p)

    @property
    def size(self) -> int:
        return self.pieces.shape[0]

    def to_payload(self) -> dict:
        return {
            "pieces": self.pieces.tolist(),
            "gamma": self.gamma,
            "eps": self.eps,
            "delta": self.delta,
            "centers": list(self.centers),
            "net": list(self.net),
        }


def cutting_verify(
    cutting: Cutting, phi: FuzzyPredicate, nu: DiscreteMeasure, eps: float, delta: float
) -> Certificate:
    """Exhaustive check of both cutting conditions: weight and per-piece bad mass."""
    if cutting.size == 0:
        raise ValueError("cutting family must be nonempty")
    weight = float(cutting.pieces.sum(axis=0).min())
    bad_masses = []
    worst = {"piece": None, "bad_mass": -1.0}
    for d in range(cutting.size):
        sup = np.flatnonzero(cutting.pieces[d] > SUPPORT_TOL)
        if sup.size == 0:
            bad_masses.append(0.0)
            continue
        cols = phi.values[sup]
        osc = cols.max(axis=0) - cols.min(axis=0)
        bad = float(nu.weights[osc > eps + SUM_TOL].sum())
        bad_masses.append(bad)
        if bad > worst["bad_mass"]:
            worst = {"piece": d, "bad_mass": bad}
    measured = max(bad_masses)
    weight_ok = weight >= cutting.gamma - SUM_TOL
    cert = make_certificate(
        pipeline="cutting-verify",
        inputs={"phi": phi, "mus": [nu], "cutting": cutting.to_payload()},
        parameters={"eps": eps, "delta": delta, "gamma": cutting.gamma},
        witness={"family_size": cutting.size, "weight": weight},
        statistics={"bad_masses": bad_masses, "worst": worst, "weight_ok": weight_ok},
        bound_formula="min_x sum_d psi(x;d) >= gamma and nu(osc > eps) <= delta per piece",
        claimed_bound=delta,
        measured=measured,
        bound_kind="upper",
        tolerance=SUM_TOL,
    )
    cert.verdict = cert.check() and weight_ok
    return cert


def cutting_build(
    phi: FuzzyPredicate, nu: DiscreteMeasure, eps: float, delta: float, seed: int = 0
) -> Cutting:
    """Construct an (eps, delta)-cutting of weight eps/4 for phi against nu.

    theta(x; d) = max over net columns b of |phi(x;b) - phi(a_d;b)| plays the
    honest-definition role, with a_d the pattern center attached to d; the net
    over the column axis is grown by eps_net_search on the defect predicate
    chi(b; d) = max_x(phi(x;b) - theta(x;d)) -. min_x(phi(x;b) + theta(x;d))
    until every kept piece has bad-column mass below delta.  theta is defined
    relative to the current net, so the net is iterated to a fixpoint; each
    extension step is one net search.  The result must pass cutting_verify.
    """
    if eps <= 0 or delta <= 0:
        raise ValueError("eps and delta must be positive")
    if phi.arity != 2:
        raise ValueError("cutting_build needs a binary predicate")
    y_size = phi.axes[1].size
    net: list[int] = []
    for _ in range(y_size + 1):
        if net:
            part = cover_partition(phi, net, 2e-12, "constructible")
            centers = part.centers
            cols = phi.values[:, sorted(net)]
            theta = np.stack(
                [np.max(np.abs(cols - cols[c]), axis=1) for c in centers]
            )
        else:
            centers = (0,)
            theta = np.zeros((1, phi.axes[0].size))
        upper = np.max(phi.values[:, :, None] - theta.T[:, None, :], axis=0)  # (y, d)
        lower = np.min(phi.values[:, :, None] + theta.T[:, None, :], axis=0)
        chi = np.maximum(0.0, upper - lower)
        chi[chi <= SUPPORT_TOL] = 0.0  # rounding noise must not register as a defect
        # keep only pieces whose defect vanishes on the whole net; every pattern
        # center passes by construction, so the cover of the axis is preserved
        if net:
            keep = np.flatnonzero(chi[sorted(net), :].max(axis=0) == 0.0)
        else:
            keep = np.arange(theta.shape[0])
        centers = tuple(centers[i] for i in keep)
        theta = theta[keep]
        chi = chi[:, keep]
        heavy = np.flatnonzero(nu.weights @ (chi >= eps / 2.0) >= delta)
        if heavy.size == 0:
            pieces = np.maximum(0.0, eps / 4.0 - theta)
            cutting = Cutting(
                pieces,
                gamma=eps / 4.0,
                eps=eps,
                delta=delta,
                centers=tuple(int(c) for c in centers),
                net=tuple(sorted(net)),
            )
            cert = cutting_verify(cutting, phi, nu, eps, delta)
            if not cert.verdict:
                raise CuttingConstructionError(
                    f"constructed cutting failed verification: {cert.statistics}"
                )
            return cutting
        chi_axis_y = phi.axes[1]
        from .core import Axis as _Axis

        chi_pred = FuzzyPredicate(
            (chi_axis_y, _Axis("pieces", chi.shape[1])), np.clip(chi, 0.0, 1.0)
        )
        found = eps_net_search(chi_pred, nu, delta, 0.0, min(eps / 2.0, 1.0), "greedy", seed)
        if not found.valid:
            raise CuttingConstructionError(
                f"net search infeasible: column {found.infeasible_column}, "
                f"violations {found.violations}"
            )
        new = [b for b in found.elements if b not in net]
        if not new:
            raise CuttingConstructionError("net iteration stalled without covering defects")
        net.extend(new)
    raise CuttingConstructionError("net iteration failed to converge")


def finite_cut(
    mu: DiscreteMeasure, cells: Sequence[Sequence[int]], r: float, eps: float
) -> tuple[int, ...]:
    """Greedy minimal union of cells with mass within eps of the target r.

    Cells must cover the axis and each weigh at most eps.  Accumulates
    largest-first (lowest index ties) until the target is met, then drops
    removable cells; minimality forces |mass - r| <= eps.
    """
    if not (0.0 <= r <= 1.0):
        raise ValueError("target r must lie in [0,1]")
    cell_sets = [tuple(sorted(int(i) for i in c)) for c in cells]
    covered = set()
    for c in cell_sets:
        covered.update(c)
    if covered != set(range(mu.axis.size)):
        raise ValueError("cells do not cover the axis")
    masses = [mu.mass(c) for c in cell_sets]
    if any(m > eps + SUM_TOL for m in masses):
        raise ValueError(f"cell mass exceeds eps={eps}")
    if r == 0.0:
        return ()
    order = sorted(range(len(cell_sets)), key=lambda i: (-masses[i], i))
    chosen: list[int] = []
    total = 0.0
    for i in order:
        chosen.append(i)
        total += masses[i]
        if total >= r:
            break
    # drop-back: remove any cell whose removal keeps the target met
    for i in sorted(chosen, key=lambda i: (masses[i], -i)):
        if total - masses[i] >= r:
            chosen.remove(i)
            total -= masses[i]
    if abs(total - r) > eps + SUM_TOL:
        raise AssertionError(f"cut mass {total} misses target {r} by more than eps={eps}")
    out = sorted(set().union(*(cell_sets[i] for i in chosen))) if chosen else []
    return tuple(out)


@dataclass(frozen=True)
class Equipartition:
    grid: GridPartition
    mass_tables: tuple[tuple[float, ...], ...]  # per axis, per piece
    parents: tuple[tuple[int, ...], ...]  # per axis: parent piece of each new piece


def _split_piece(
    mu: DiscreteMeasure, piece: list[int], k: int, gamma: float
) -> list[list[int]]:
    """Split one piece into k chunks of nearly equal mass via finite_cut."""
    from .core import Axis as _Axis

    remaining = sorted(piece)
    chunks: list[list[int]] = []
    for parts_left in range(k, 1, -1):
        total = mu.mass(remaining)
        if total <= SUPPORT_TOL or len(remaining) <= 1:
            break
        local_w = mu.weights[remaining]
        local = DiscreteMeasure(_Axis(f"{mu.axis.name}|chunk", len(remaining)), local_w / total)
        eps_local = min(1.0, max(local_w.max() / total, gamma / (2.0 * total)))
        sel = finite_cut(local, [[i] for i in range(len(remaining))], 1.0 / parts_left, eps_local)
        chunk = [remaining[i] for i in sel]
        if not chunk or len(chunk) == len(remaining):
            chunk = [remaining[0]]
        chunks.append(sorted(chunk))
        remaining = [i for i in remaining if i not in chunk]
    if remaining:
        chunks.append(remaining)
    return chunks


def _refine_axis(
    partition: PartitionOfUnity, mu: DiscreteMeasure, gamma: float
) -> tuple[PartitionOfUnity, tuple[int, ...]]:
    pieces = [sorted(int(i) for i in np.flatnonzero(row > 0.5)) for row in partition.pieces]
    masses = [mu.mass(p) for p in pieces]
    if max(masses) - min(masses) <= gamma + SUM_TOL:
        return partition, tuple(range(len(pieces)))

    def assemble(chunk_lists: list[list[list[int]]]):
        new_pieces: list[list[int]] = []
        parents: list[int] = []
        for pi, chunks in enumerate(chunk_lists):
            for chunk in chunks:
                new_pieces.append(chunk)
                parents.append(pi)
        spread_vals = [mu.mass(c) for c in new_pieces]
        if max(spread_vals) - min(spread_vals) > gamma + SUM_TOL:
            return None
        mat = np.zeros((len(new_pieces), mu.axis.size))
        for row, chunk in enumerate(new_pieces):
            mat[row, chunk] = 1.0
        return PartitionOfUnity(mu.axis, mat, "constructible"), tuple(parents)

    # candidate targets, coarse to fine; singleton split is the guaranteed fallback
    candidates = sorted(
        {m / k for m in masses if m > 0 for k in range(1, mu.axis.size + 1)}, reverse=True
    )
    for target in candidates:
        chunk_lists = [
            _split_piece(mu, p, max(1, round(w / target)), gamma) for p, w in zip(pieces, masses)
        ]
        result = assemble(chunk_lists)
        if result is not None:
            return result
    result = assemble([[[i] for i in p] for p in pieces])
    if result is not None:
        return result
    heaviest = int(np.argmax(mu.weights))
    raise ValueError(
        f"atom {heaviest} on axis {mu.axis.name!r} has mass {mu.weights[heaviest]} "
        f"> gamma/2 = {gamma / 2.0}; equipartition impossible"
    )


def equipartition_refine(
    grid: GridPartition, mus: Sequence[DiscreteMeasure], gamma: float
) -> Equipartition:
    """Refine each axis partition into pieces of pairwise mass gap at most gamma.

    Original pieces survive as unions of new pieces, so any homogeneity
    verdict attached to a product cell is inherited by its refinements.
    Requires per-axis atoms of mass at most gamma/2.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if any(f.mode != "constructible" for f in grid.factors):
        raise ValueError("equipartition refines constructible grids only")
    new_factors = []
    parents = []
    tables = []
    for factor, mu in zip(grid.factors, mus):
        refined, par = _refine_axis(factor, mu, gamma)
        new_factors.append(refined)
        parents.append(par)
        tables.append(tuple(mu.mass(p) for p in refined.supports()))
    return Equipartition(GridPartition(tuple(new_factors)), tuple(tables), tuple(parents))


def induced_grid(cert: DistalPartitionCertificate, axes) -> GridPartition:
    """Per-axis common refinement of a box partition; boxes become unions of cells."""
    factors = []
    for i, ax in enumerate(axes):
        signatures: dict[tuple[bool, ...], list[int]] = {}
        sides = [set(box[i]) for box in cert.boxes]
        for x in range(ax.size):
            key = tuple(x in s for s in sides)
            signatures.setdefault(key, []).append(x)
        mat = np.zeros((len(signatures), ax.size))
        for row, key in enumerate(sorted(signatures)):
            mat[row, signatures[key]] = 1.0
        factors.append(PartitionOfUnity(ax, mat, "constructible"))
    return GridPartition(tuple(factors))
