"""Sampling pipelines: approximation witnesses, tail bounds, nets, step families.

Monte Carlo draws use inverse-CDF sampling with a counter-based generator
keyed by (seed, trial index), so trials are reproducible and order-free.
Empirical frequencies are compared against their bounds with a fixed 99%
confidence slack sqrt(ln(100) / (2 * trials)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .certificates import make_certificate
from .core import Certificate, DiscreteMeasure, FuzzyPredicate, SUPPORT_TOL
from .covering import COLUMNS, covering_number
from .rng import sample_measure, stream_rng


def confidence_slack(trials: int) -> float:
    return math.sqrt(math.log(100.0) / (2.0 * trials))


@dataclass(frozen=True)
class ApproximationWitness:
    """A tuple of row elements whose column averages track the integral."""

    elements: tuple[int, ...]
    eps: float
    worst_error: float
    found: bool = True
    attempts: int = 1

    @property
    def valid(self) -> bool:
        return self.found and self.worst_error <= self.eps + 1e-12


@dataclass(frozen=True)
class FuzzyNet:
    """Elements hitting (above r) every column whose s-superlevel set is eps-heavy."""

    elements: tuple[int, ...]
    r: float
    s: float
    eps: float
    violations: tuple[int, ...] = ()
    feasible: bool = True
    infeasible_column: int | None = None

    @property
    def valid(self) -> bool:
        return self.feasible and not self.violations


@dataclass(frozen=True)
class StepFunctionFamily:
    """Piecewise-constant [0,1] functions on a shared breakpoint grid.

    Pieces are right-open intervals [b_k, b_{k+1}); the last piece also takes
    the value at t = 1.  Breakpoints strictly increase from 0 to 1.
    """

    breakpoints: np.ndarray  # shape (K+1,)
    values: np.ndarray  # shape (members, K)
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).copy()
        vals = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        bp.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must strictly increase from 0 to 1")
        if vals.shape[1] != len(bp) - 1:
            raise ValueError("one value per piece required")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("step values must lie in [0,1]")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"f{i}" for i in range(vals.shape[0])))

    @property
    def members(self) -> int:
        return self.values.shape[0]

    def evaluate(self, t) -> np.ndarray:
        """Values of every member at points t; shape (members, len(t))."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        idx = np.clip(idx, 0, self.values.shape[1] - 1)
        return self.values[:, idx]

    def integrals(self) -> np.ndarray:
        return self.values @ np.diff(self.breakpoints)


def f_n_statistic(phi: FuzzyPredicate, abar, abar2) -> float:
    """Largest column-wise gap between the averages of two row tuples."""
    if phi.arity != 2:
        raise ValueError("f_n_statistic needs a binary predicate")
    a1 = np.asarray(list(abar), dtype=int)
    a2 = np.asarray(list(abar2), dtype=int)
    if len(a1) != len(a2) or len(a1) == 0:
        raise ValueError(f"tuples must have equal positive length, got {len(a1)} and {len(a2)}")
    diff = phi.values[a1].mean(axis=0) - phi.values[a2].mean(axis=0)
    return float(np.max(np.abs(diff)))


def _tuple_errors(phi: FuzzyPredicate, mu: DiscreteMeasure, tuples: np.ndarray) -> np.ndarray:
    """Worst-column deviation of each row-tuple's averages from the integral."""
    col_means = mu.weights @ phi.values
    n = tuples.shape[1]
    counts = np.zeros((tuples.shape[0], phi.axes[0].size))
    for t in range(tuples.shape[0]):
        counts[t] = np.bincount(tuples[t], minlength=phi.axes[0].size)
    avgs = (counts / n) @ phi.values
    return np.max(np.abs(avgs - col_means), axis=1)


def hoeffding_tail_check(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    n: int,
    eps: float,
    trials: int,
    seed: int,
) -> Certificate:
    """Empirical tail of the two-sample statistic against its covering bound.

    Draws `trials` pairs of n-tuples i.i.d. from mu, measures how often the
    statistic exceeds eps, and compares with 4 * N(eps/4) * exp(-n eps^2 / 32)
    plus the confidence slack of the estimate itself.
    """
    if phi.arity != 2:
        raise ValueError("hoeffding_tail_check needs a binary predicate")
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    exceed = 0
    for t in range(trials):
        rng = stream_rng(seed, t)
        draw = sample_measure(mu.weights, 2 * n, rng)
        stat = f_n_statistic(phi, draw[:n], draw[n:])
        if stat > eps:
            exceed += 1
    empirical = exceed / trials
    cov = covering_number(phi, eps / 4.0, n, COLUMNS, "greedy", samples=64, seed=seed)
    bound = 4.0 * cov * math.exp(-n * eps * eps / 32.0)
    slack = confidence_slack(trials)
    return make_certificate(
        pipeline="tail-check",
        inputs={"phi": phi, "mus": [mu]},
        parameters={"n": n, "eps": eps, "trials": trials, "seed": seed},
        witness={"covering_number": cov, "covering_mode": "greedy", "covering_samples": 64},
        statistics={"empirical_tail": empirical, "slack": slack},
        bound_formula="4*N(eps/4)*exp(-n*eps^2/32)",
        claimed_bound=bound,
        measured=empirical,
        bound_kind="upper",
        tolerance=slack,
    )


def eps_approximation_search(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    eps: float,
    n: int,
    max_attempts: int = 64,
    seed: int = 0,
) -> ApproximationWitness:
    """Sample n-tuples from mu until one is a verified eps-approximation.

    Verification is exhaustive over all columns.  Failure is a value, not an
    exception: the best tuple found is returned with found=False.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    sufficient = math.ceil(9.0 / (2.0 * eps * eps))
    if n < sufficient:
        warnings.warn(
            f"n = {n} is below the sufficient size {sufficient} = ceil(9/(2*eps^2)); "
            "witnesses may be rare",
            stacklevel=2,
        )
    best: tuple[float, tuple[int, ...]] | None = None
    for attempt in range(max_attempts):
        rng = stream_rng(seed, attempt)
        draw = sample_measure(mu.weights, n, rng)
        err = float(_tuple_errors(phi, mu, draw[None, :])[0])
        if best is None or err < best[0]:
            best = (err, tuple(int(i) for i in draw))
        if err <= eps:
            return ApproximationWitness(best[1], eps, err, True, attempt + 1)
    return ApproximationWitness(best[1], eps, best[0], False, max_attempts)


def theta_witness_set(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    n: int,
    eps: float,
    samples: int,
    seed: int,
) -> Certificate:
    """Monte Carlo mass of eps-approximation tuples against its lower bound."""
    if phi.arity != 2:
        raise ValueError("theta_witness_set needs a binary predicate")
    tuples = np.stack(
        [sample_measure(mu.weights, n, stream_rng(seed, t)) for t in range(samples)]
    )
    errors = _tuple_errors(phi, mu, tuples)
    estimate = float(np.mean(errors <= eps))
    cov = covering_number(phi, eps / 12.0, n, COLUMNS, "greedy", samples=64, seed=seed)
    bound = 1.0 - 8.0 * cov * math.exp(-n * eps * eps / 96.0)
    slack = confidence_slack(samples)
    return make_certificate(
        pipeline="theta-witness",
        inputs={"phi": phi, "mus": [mu]},
        parameters={"n": n, "eps": eps, "samples": samples, "seed": seed},
        witness={"covering_number": cov, "covering_mode": "greedy", "covering_samples": 64},
        statistics={"estimate": estimate, "slack": slack},
        bound_formula="1-8*N(eps/12)*exp(-n*eps^2/96)",
        claimed_bound=bound,
        measured=estimate,
        bound_kind="lower",
        tolerance=slack,
    )


def _verify_net(phi: FuzzyPredicate, mu: DiscreteMeasure, elements, eps, r, s) -> tuple[int, ...]:
    heavy = np.flatnonzero(mu.weights @ (phi.values >= s) >= eps)
    if len(elements) == 0:
        return tuple(int(b) for b in heavy)
    hit = (phi.values[np.asarray(list(elements), dtype=int)] > r).any(axis=0)
    return tuple(int(b) for b in heavy if not hit[b])


def eps_net_search(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    eps: float,
    r: float,
    s: float,
    strategy: str = "greedy",
    seed: int = 0,
    max_retries: int = 8,
) -> FuzzyNet:
    """Find a net for the superlevel system at thresholds r < s.

    A net hits (value > r) every column b whose s-superlevel set has
    mu-mass >= eps.  greedy: pick the element covering the most unhit heavy
    columns (lowest index on ties).  random: sample from mu and retry with a
    doubled sample on failure.  Returned nets are re-verified exhaustively.
    """
    if phi.arity != 2:
        raise ValueError("eps_net_search needs a binary predicate")
    if not (0.0 <= r < s <= 1.0):
        raise ValueError(f"thresholds must satisfy 0 <= r < s <= 1, got r={r}, s={s}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    heavy = np.flatnonzero(mu.weights @ (phi.values >= s) >= eps)
    if heavy.size == 0:
        return FuzzyNet((), r, s, eps)
    hits = phi.values[:, heavy] > r  # rows x heavy columns
    no_hitter = ~hits.any(axis=0)
    if no_hitter.any():
        col = int(heavy[int(np.argmax(no_hitter))])
        return FuzzyNet((), r, s, eps, feasible=False, infeasible_column=col)

    if strategy == "greedy":
        uncovered = np.ones(heavy.size, dtype=bool)
        chosen: list[int] = []
        while uncovered.any():
            gains = (hits & uncovered).sum(axis=1)
            a = int(np.argmax(gains))  # argmax takes the lowest index on ties
            chosen.append(a)
            uncovered &= ~hits[a]
        net = FuzzyNet(tuple(chosen), r, s, eps, _verify_net(phi, mu, chosen, eps, r, s))
        return net
    if strategy == "random":
        n0 = max(1, math.ceil((2.0 / eps) * math.log(4.0 * max(2, heavy.size))))
        for retry in range(max_retries):
            rng = stream_rng(seed, retry)
            draw = sample_measure(mu.weights, n0 << retry, rng)
            elements = tuple(dict.fromkeys(int(i) for i in draw))
            violations = _verify_net(phi, mu, elements, eps, r, s)
            if not violations:
                return FuzzyNet(elements, r, s, eps)
        return FuzzyNet(elements, r, s, eps, violations)
    raise ValueError(f"unknown strategy {strategy!r}")


def oscillation_pair_count(values, eps: float) -> int:
    """Maximum count of disjoint left-to-right pairs with a value jump above eps/2.

    Greedy scan over the constant pieces: track the running min/max since the
    last completed pair; a piece value escaping the eps/2 window completes a
    pair and restarts the window at that piece.  Exact in one dimension.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        return 0
    half = eps / 2.0
    count = 0
    lo = hi = vals[0]
    for v in vals[1:]:
        if v > lo + half or v < hi - half:
            count += 1
            lo = hi = v
        else:
            lo = min(lo, v)
            hi = max(hi, v)
    return count


def grid_approximation_check(family: StepFunctionFamily, eps: float) -> Certificate:
    """Uniform-grid average vs exact integral for every member of the family.

    N is the worst oscillation-pair count, the grid has M = floor(2N/eps) + 1
    points, and the check passes when every member's grid average is within
    eps of its exact integral.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pair_counts = [oscillation_pair_count(row, eps) for row in family.values]
    n_pairs = max(pair_counts)
    m_grid = int(2 * n_pairs / eps) + 1
    grid = np.arange(m_grid) / m_grid
    averages = family.evaluate(grid).mean(axis=1)
    exact = family.integrals()
    errors = np.abs(averages - exact)
    measured = float(errors.max())
    return make_certificate(
        pipeline="grid-approx",
        inputs={"family": family},
        parameters={"eps": eps},
        witness={"oscillation_pairs": n_pairs, "grid_size": m_grid},
        statistics={
            "per_member_error": [float(e) for e in errors],
            "worst_member": family.labels[int(np.argmax(errors))],
        },
        bound_formula="grid average within eps for M=floor(2N/eps)+1",
        claimed_bound=eps,
        measured=measured,
        bound_kind="upper",
        tolerance=1e-12,
    )


def average_measure_expectation(
    family: StepFunctionFamily, weights=None
) -> tuple[np.ndarray, float | None]:
    """Exact integral of each member over [0,1]; optionally a weighted aggregate.

    Realizes integration against the average measure of a segment, with step
    functions standing in for the parameter traces.
    """
    per_member = family.integrals()
    aggregate = None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (family.members,):
            raise ValueError(f"need one weight per member, got shape {w.shape}")
        aggregate = float(w @ per_member)
    return per_member, aggregate


def measure_support_tuple(mu: DiscreteMeasure) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(mu.weights > SUPPORT_TOL))
