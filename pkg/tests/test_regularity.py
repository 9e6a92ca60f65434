import numpy as np
import pytest

from fuzzyreg.core import (
    Axis,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    PartitionOfUnity,
    expectation,
)
from fuzzyreg.instances import constant_matrix, half_graph, threshold_matrix
from fuzzyreg.regularity import (
    SumOfProducts,
    homogeneous_grid,
    minimal_refinement,
    nip_regularity,
    sandwich_build,
    structured_approximation,
)


def l1_distance(phi, theta_tensor, mus):
    diff = np.clip(np.abs(phi.values - theta_tensor), 0.0, 1.0)
    return expectation(FuzzyPredicate(phi.axes, diff), mus)


def grid_oscillations(theta, grid):
    tensor = theta.tensor()
    worst = 0.0
    for cell in grid.cells():
        sups = grid.cell_supports(cell)
        if any(s.size == 0 for s in sups):
            continue
        sub = tensor[np.ix_(*sups)]
        worst = max(worst, float(sub.max() - sub.min()))
    return worst


def test_minimal_refinement_satisfies_inequality():
    ax = Axis("x", 4)
    sop = SumOfProducts((ax, ax), (np.random.default_rng(0).random((3, 4)), np.random.default_rng(1).random((3, 4))))
    for eps in (0.5, 1.0, 2.5):
        n_ref = minimal_refinement(sop, eps)
        m, n = sop.terms, sop.arity
        assert m * ((1 + 2 / n_ref) ** n - 1) <= eps / 2
        if n_ref > 1:
            assert m * ((1 + 2 / (n_ref - 1)) ** n - 1) > eps / 2


def test_homogeneous_grid_constant_factors():
    ax = Axis("x", 5)
    sop = SumOfProducts((ax,), (np.full((1, 5), 0.4),))
    grid = homogeneous_grid(sop, 0.3, "constructible")
    nonempty = [c for c in grid.cells() if all(s.size for s in grid.cell_supports(c))]
    assert len(nonempty) == 1
    assert grid_oscillations(sop, grid) == 0.0


@pytest.mark.parametrize("mode", ["definable", "constructible"])
def test_homogeneous_grid_identity_factors(mode):
    ax = Axis("x", 4)
    vals = np.array([[0.0, 1 / 3, 2 / 3, 1.0]])
    sop = SumOfProducts((ax, ax), (vals, vals))
    grid = homogeneous_grid(sop, 0.5, mode)
    assert grid_oscillations(sop, grid) <= 0.5 + 1e-9
    total = np.zeros((4, 4))
    for cell in grid.cells():
        total += grid.cell_weight(cell)
    assert np.allclose(total, 1.0, atol=1e-9)


def test_homogeneous_grid_large_eps_single_bucket():
    ax = Axis("x", 4)
    sop = SumOfProducts((ax,), (np.array([[0.0, 0.4, 0.7, 1.0]]),))
    # eps >= 2: the range bound makes every cell trivially homogeneous
    grid = homogeneous_grid(sop, 2.0, "constructible")
    assert grid_oscillations(sop, grid) <= 1.0 <= 2.0
    # at eps = 4 the refinement collapses to N = 1 for a single 1-ary term
    assert minimal_refinement(sop, 4.0) == 1


def test_structured_approximation_constant():
    const = constant_matrix(4)
    mus = [DiscreteMeasure.uniform(ax) for ax in const.axes]
    sa = structured_approximation(const, mus, 0.1, seed=0)
    assert sa.l1_error == pytest.approx(0.0, abs=1e-12)


def test_structured_approximation_rank_one():
    ax = Axis("x", 4)
    ay = Axis("y", 4)
    u = np.array([0.1, 0.4, 0.6, 0.9])
    v = np.array([1.0, 0.5, 0.25, 0.0])
    phi = FuzzyPredicate((ax, ay), np.outer(u, v))
    mus = [DiscreteMeasure.uniform(ax), DiscreteMeasure.uniform(ay)]
    sa = structured_approximation(phi, mus, 0.3, seed=1)
    assert sa.l1_error <= 0.3


def test_structured_approximation_half_graph(hg8, u8, u8y):
    sa = structured_approximation(hg8, [u8, u8y], 0.3, seed=1)
    assert sa.l1_error <= 0.3
    # independent exhaustive L1 check of the returned tensor
    assert l1_distance(hg8, sa.theta.tensor(), [u8, u8y]) == pytest.approx(sa.l1_error, abs=1e-12)


@pytest.mark.filterwarnings("ignore:n = 3 is below")
def test_approximation_failure_reports_best_error(hg4, u4):
    # averages over 3-tuples step by 1/3, so no tuple tracks a 1/4 integral to 0.01
    from fuzzyreg.sampling import eps_approximation_search

    w = eps_approximation_search(hg4, u4, 0.01, 3, max_attempts=8, seed=0)
    assert not w.found and w.worst_error > 0.01


def test_structured_approximation_ternary():
    ax = Axis("a", 3)
    rng = np.random.default_rng(5)
    phi = FuzzyPredicate((ax, ax, ax), rng.random((3, 3, 3)))
    mus = [DiscreteMeasure.uniform(ax)] * 3
    sa = structured_approximation(phi, mus, 0.4, seed=2)
    assert sa.l1_error <= 0.4
    assert sa.theta.arity == 3


@pytest.mark.parametrize(
    "make_phi,eps,delta",
    [
        (half_graph, 0.3, 0.3),
        (half_graph, 0.2, 0.2),
        (threshold_matrix, 0.3, 0.3),
        (threshold_matrix, 0.2, 0.2),
    ],
)
def test_nip_regularity_instances(make_phi, eps, delta):
    phi = make_phi(8)
    mus = [DiscreteMeasure.uniform(ax) for ax in phi.axes]
    cert = nip_regularity(phi, mus, eps, delta, "constructible", seed=1)
    assert cert.verdict
    assert cert.exceptional_mass <= delta + 1e-9
    for cell, data in cert.good_cells.items():
        assert data["deviation"] <= eps * data["mass"] + 1e-9


def test_nip_regularity_constant_no_exceptional():
    const = constant_matrix(4)
    mus = [DiscreteMeasure.uniform(ax) for ax in const.axes]
    cert = nip_regularity(const, mus, 0.2, 0.1, "constructible", seed=0)
    assert cert.exceptional == ()
    assert all(d["deviation"] <= 1e-9 for d in cert.good_cells.values())


@pytest.mark.parametrize("mode", ["constructible", "definable"])
def test_nip_regularity_rank_one_zero_exceptional(mode):
    ax = Axis("x", 4)
    ay = Axis("y", 4)
    phi = FuzzyPredicate((ax, ay), np.outer([0.2, 0.4, 0.6, 0.8], [1.0, 0.75, 0.5, 0.25]))
    mus = [DiscreteMeasure.uniform(ax), DiscreteMeasure.uniform(ay)]
    cert = nip_regularity(phi, mus, 0.2, 0.1, mode, seed=3)
    assert cert.verdict
    assert cert.exceptional_mass <= 0.1 + 1e-9


def test_sandwich_constant_gap_zero():
    const = constant_matrix(4)
    mus = [DiscreteMeasure.uniform(ax) for ax in const.axes]
    trivial = GridPartition(
        tuple(PartitionOfUnity(ax, np.ones((1, ax.size)), "constructible") for ax in const.axes)
    )
    sw = sandwich_build(const, trivial, mus)
    assert sw.gap == pytest.approx(0.0, abs=1e-12)


def test_sandwich_trivial_grid_gap_is_range(hg4, u4, u4y):
    trivial = GridPartition(
        tuple(PartitionOfUnity(ax, np.ones((1, ax.size)), "constructible") for ax in hg4.axes)
    )
    sw = sandwich_build(hg4, trivial, [u4, u4y])
    assert sw.gap == pytest.approx(1.0, abs=1e-12)  # max - min of the half graph


def refine_constructible(pou, splitter):
    """Common refinement of two constructible partitions on the same axis."""
    rows = []
    for a in pou.pieces:
        for b in splitter.pieces:
            piece = a * b
            if piece.any():
                rows.append(piece)
    return PartitionOfUnity(pou.axis, np.stack(rows), "constructible")


def test_sandwich_pointwise_and_refinement(hg8, u8, u8y):
    from fuzzyreg.covering import cover_partition

    cols = list(range(8))
    coarse_x = cover_partition(hg8, cols, 1.0, "constructible")
    coarse_y = cover_partition(hg8.transpose(), cols, 1.0, "constructible")
    split_x = cover_partition(hg8, cols, 0.5, "constructible")
    split_y = cover_partition(hg8.transpose(), cols, 0.5, "constructible")
    coarse = GridPartition((coarse_x, coarse_y))
    fine = GridPartition(
        (refine_constructible(coarse_x, split_x), refine_constructible(coarse_y, split_y))
    )
    sw_coarse = sandwich_build(hg8, coarse, [u8, u8y])
    sw_fine = sandwich_build(hg8, fine, [u8, u8y])
    assert np.all(sw_coarse.chi_minus <= hg8.values + 1e-9)
    assert np.all(sw_coarse.chi_plus >= hg8.values - 1e-9)
    # the fine grid is a genuine refinement of the coarse one, so the gap shrinks
    assert sw_fine.gap <= sw_coarse.gap + 1e-9
