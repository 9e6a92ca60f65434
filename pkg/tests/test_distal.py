import math
import os
from itertools import combinations, product

import numpy as np
import pytest

from fuzzyreg.core import Axis, DiscreteMeasure, FuzzyPredicate, GridPartition, PartitionOfUnity, oscillation
from fuzzyreg.distal import (
    BruteForceSehOracle,
    Cutting,
    DensityExtractionError,
    bucket_identity_defect,
    bucketed_seh,
    cutting_build,
    cutting_verify,
    density_seh,
    distal_partition,
    equipartition_refine,
    finite_cut,
    induced_grid,
    seh_bruteforce,
)
from fuzzyreg.instances import (
    constant_matrix,
    half_graph,
    identity_matrix,
    threshold_matrix,
    uniform,
)


def exhaustive_seh_exists(phi, mus, eps, delta):
    """Independent oracle: plain double loop over all nonempty subset pairs."""
    n0, n1 = phi.values.shape
    for r in range(1, n0 + 1):
        for rows in combinations(range(n0), r):
            if mus[0].mass(rows) < delta - 1e-12:
                continue
            for c in range(1, n1 + 1):
                for cols in combinations(range(n1), c):
                    if mus[1].mass(cols) < delta - 1e-12:
                        continue
                    sub = phi.values[np.ix_(rows, cols)]
                    if sub.max() - sub.min() <= eps + 1e-12:
                        return True
    return False


def two_uniform(phi):
    return [DiscreteMeasure.uniform(ax) for ax in phi.axes]


def test_seh_constant_full_rectangle():
    const = constant_matrix(4)
    out = seh_bruteforce(const, two_uniform(const), 0.1, 1.0)
    rect = out.rectangle
    assert rect is not None
    assert rect.masses == (1.0, 1.0)


def test_seh_half_graph(hg8):
    out = seh_bruteforce(hg8, two_uniform(hg8), 0.5, 0.5)
    rect = out.rectangle
    assert rect is not None
    assert rect.oscillation == 0.0
    assert all(m >= 0.5 for m in rect.masses)


def test_seh_identity_example():
    idm = identity_matrix(4)
    out = seh_bruteforce(idm, two_uniform(idm), 0.0, 0.5)
    assert out.rectangle.subsets == ((0, 1), (2, 3))


def test_seh_budget_exhaustion(hg8):
    out = seh_bruteforce(hg8, two_uniform(hg8), 0.0, 0.1, budget=1)
    # the first candidate (full x full) is inhomogeneous, so the budget runs out
    assert out.rectangle is None and not out.exhaustive


def test_seh_none_is_exhaustive():
    # alternating checkerboard at eps=0 and delta=1: only the full rectangle
    # qualifies on mass, and it oscillates
    vals = np.indices((4, 4)).sum(axis=0) % 2
    phi = FuzzyPredicate.from_array(vals.astype(float))
    out = seh_bruteforce(phi, two_uniform(phi), 0.0, 1.0)
    assert out.rectangle is None and out.exhaustive


def make_cert(phi, gamma, eps=0.0, delta=0.5):
    oracle = BruteForceSehOracle(eps=eps, delta=delta)
    return distal_partition(phi, two_uniform(phi), eps, gamma, oracle)


def test_distal_partition_constant_trivial():
    const = constant_matrix(4)
    cert = make_cert(const, 0.25)
    assert cert.rounds_used == 0
    assert len(cert.boxes) == 1
    assert cert.nonhomogeneous_mass == 0.0
    assert cert.verdict


def test_distal_partition_gamma_ge_one_vacuous(hg8):
    cert = make_cert(hg8, 1.0)
    assert cert.rounds_budget == 0
    assert cert.verdict


def test_distal_partition_half_graph(hg8):
    cert = make_cert(hg8, 0.25)
    budget = math.ceil(math.log(0.25) / math.log(1 - 0.25**2))
    assert cert.rounds_budget == budget
    assert cert.rounds_used <= budget
    assert cert.nonhomogeneous_mass <= 0.25 + 1e-9
    assert len(cert.boxes) <= 3**budget
    assert cert.verdict
    # boxes tile the product space exactly
    cover = np.zeros((8, 8), dtype=int)
    for box in cert.boxes:
        cover[np.ix_(box[0], box[1])] += 1
    assert (cover == 1).all()


def test_distal_partition_round_ledger_monotone(hg8):
    cert = make_cert(hg8, 1 / 16)
    masses = [r["uncovered_mass"] for r in cert.round_ledger]
    assert all(a >= b - 1e-12 for a, b in zip(masses, masses[1:]))
    shrink = 1 - 0.25**2
    for before, after, ledger in zip([1.0] + masses, masses, cert.round_ledger):
        if ledger["split"] == ledger["queried"]:  # full-success round
            assert after <= before * shrink + 1e-9


def test_distal_partition_homog_flags_verified(hg8):
    cert = make_cert(hg8, 0.25)
    for box, flag in zip(cert.boxes, cert.homogeneous):
        sub = hg8.values[np.ix_(box[0], box[1])]
        assert flag == (sub.max() - sub.min() <= cert.eps + 1e-9)


def test_distal_partition_threads_env_matches_serial(hg8, monkeypatch):
    cert1 = make_cert(hg8, 0.25)
    monkeypatch.setenv("FR_THREADS", "4")
    cert2 = make_cert(hg8, 0.25)
    assert cert1.boxes == cert2.boxes
    assert cert1.nonhomogeneous_mass == cert2.nonhomogeneous_mass


def test_density_seh_constant():
    const = constant_matrix(4, 0.5)
    cert = make_cert(const, 0.25, eps=0.1)
    rect = density_seh(const, cert, two_uniform(const), alpha=0.5, beta=0.0)
    assert rect.masses == (1.0, 1.0)


def test_density_seh_half_graph(hg8):
    cert = make_cert(hg8, 0.1)
    mus = two_uniform(hg8)
    rect = density_seh(hg8, cert, mus, alpha=0.375, beta=0.0)
    threshold = (0.375 - 0.0 - 0.1 - 0.0) / len(cert.boxes)
    assert all(m >= threshold - 1e-9 for m in rect.masses)
    sub = hg8.values[np.ix_(*[list(s) for s in rect.subsets])]
    assert sub.min() >= 0.0


def test_density_seh_requires_margin(hg8):
    cert = make_cert(hg8, 0.25)
    with pytest.raises(ValueError, match="alpha"):
        density_seh(hg8, cert, two_uniform(hg8), alpha=0.2, beta=0.0)


def test_density_seh_limiting_beta(hg8):
    cert = make_cert(hg8, 1 / 16)
    alpha = 0.375
    beta = alpha - 1 / 16 - 1e-6
    rect = density_seh(hg8, cert, two_uniform(hg8), alpha, beta)
    sub = hg8.values[np.ix_(*[list(s) for s in rect.subsets])]
    assert sub.min() >= beta - 1e-9


def test_bucket_identity_exact():
    rng = np.random.default_rng(0)
    phi = FuzzyPredicate.from_array(rng.random((6, 6)))
    for s in range(1, 11):
        assert bucket_identity_defect(phi, s) <= 1e-12


def test_bucketed_seh_constant():
    const = constant_matrix(4, 0.5)
    rect = bucketed_seh(const, two_uniform(const), 2)
    assert rect.masses == (1.0, 1.0)
    assert rect.oscillation == 0.0


def test_bucketed_seh_s1_vacuous(hg4):
    rect = bucketed_seh(hg4, two_uniform(hg4), 1)
    assert rect.oscillation <= 2.0


def test_bucketed_seh_threshold_matrix():
    thr = threshold_matrix(8)
    rect = bucketed_seh(thr, two_uniform(thr), 4)
    assert rect.oscillation <= 0.5 + 1e-9
    assert oscillation(thr, rect.subsets) <= 0.5 + 1e-9


def test_cutting_verify_single_constant_piece():
    const = constant_matrix(4)
    nu = DiscreteMeasure.uniform(const.axes[1])
    cut = Cutting(np.ones((1, 4)), gamma=1.0, eps=0.1, delta=0.1)
    cert = cutting_verify(cut, const, nu, 0.1, 0.1)
    assert cert.verdict and cert.measured == 0.0


def test_cutting_verify_singletons_always_valid(hg4):
    nu = DiscreteMeasure.uniform(hg4.axes[1])
    cut = Cutting(np.eye(4), gamma=1.0, eps=0.0, delta=0.0)
    cert = cutting_verify(cut, hg4, nu, 0.0, 0.0)
    assert cert.verdict and cert.measured == 0.0


def test_cutting_build_constant():
    const = constant_matrix(4)
    nu = DiscreteMeasure.uniform(const.axes[1])
    cut = cutting_build(const, nu, 0.4, 0.25, seed=0)
    assert cut.size == 1
    assert np.allclose(cut.pieces, 0.1)  # eps/4 everywhere


def test_cutting_build_identical_rows():
    vals = np.tile(np.linspace(0, 1, 5), (4, 1))
    phi = FuzzyPredicate.from_array(vals)
    nu = DiscreteMeasure.uniform(phi.axes[1])
    cut = cutting_build(phi, nu, 0.5, 0.25, seed=0)
    assert cut.size == 1
    cert = cutting_verify(cut, phi, nu, 0.5, 0.25)
    assert cert.verdict


def test_cutting_build_handles_float_residue():
    # fractional entries leave ~1e-16 residue in the defect predicate on net
    # columns; the cutoff must keep those from stalling the net iteration
    rng = np.random.default_rng(9)
    vals = np.clip(rng.random((12, 12)) * 0.3 + np.linspace(0, 0.6, 12)[:, None], 0, 1)
    phi = FuzzyPredicate.from_array(vals)
    nu = DiscreteMeasure.uniform(phi.axes[1])
    cut = cutting_build(phi, nu, 0.5, 0.25, seed=2)
    assert cutting_verify(cut, phi, nu, 0.5, 0.25).verdict


def test_cutting_build_half_graph_16():
    hg = half_graph(16)
    nu = DiscreteMeasure.uniform(hg.axes[1])
    cut = cutting_build(hg, nu, 0.5, 0.25, seed=1)
    cert = cutting_verify(cut, hg, nu, 0.5, 0.25)
    assert cert.verdict
    assert float(cut.pieces.sum(axis=0).min()) >= 0.5 / 4 - 1e-9


def test_finite_cut_examples():
    u10 = uniform(10)
    singles = [[i] for i in range(10)]
    assert finite_cut(u10, singles, 0.0, 0.1) == ()
    assert len(finite_cut(u10, singles, 1.0, 0.1)) == 10
    got = finite_cut(u10, singles, 0.34, 0.1)
    assert abs(len(got) / 10 - 0.34) <= 0.1


def test_finite_cut_validation():
    u10 = uniform(10)
    with pytest.raises(ValueError, match="cover"):
        finite_cut(u10, [[0, 1]], 0.5, 0.2)
    with pytest.raises(ValueError, match="exceeds"):
        finite_cut(u10, [list(range(5)), list(range(5, 10))], 0.5, 0.1)


def grid_from_pieces(ax, layout):
    mat = np.zeros((len(layout), ax.size))
    for row, piece in enumerate(layout):
        mat[row, piece] = 1.0
    return GridPartition((PartitionOfUnity(ax, mat, "constructible"),))


def test_equipartition_unchanged_when_equal():
    ax = Axis("x", 8)
    grid = grid_from_pieces(ax, [[0, 1, 2, 3], [4, 5, 6, 7]])
    eq = equipartition_refine(grid, [DiscreteMeasure.uniform(ax)], 1 / 8)
    assert eq.grid.factors[0].size == 2


def test_equipartition_six_two_example():
    ax = Axis("x", 8)
    grid = grid_from_pieces(ax, [[0, 1, 2, 3, 4, 5], [6, 7]])
    eq = equipartition_refine(grid, [DiscreteMeasure.uniform(ax)], 1 / 8)
    table = eq.mass_tables[0]
    assert max(table) - min(table) <= 1 / 8 + 1e-9
    # original pieces survive as unions: every new piece has one parent
    assert set(eq.parents[0]) <= {0, 1}


def test_equipartition_gamma_ge_one_unchanged():
    ax = Axis("x", 8)
    grid = grid_from_pieces(ax, [[0], [1, 2, 3, 4, 5, 6, 7]])
    eq = equipartition_refine(grid, [DiscreteMeasure.uniform(ax)], 1.0)
    assert eq.grid.factors[0].size == 2


def test_equipartition_heavy_atom_errors():
    ax = Axis("x", 3)
    mu = DiscreteMeasure(ax, np.array([0.9, 0.05, 0.05]))
    grid = grid_from_pieces(ax, [[0], [1, 2]])
    with pytest.raises(ValueError, match="atom"):
        equipartition_refine(grid, [mu], 0.2)


def test_induced_grid_refines_boxes(hg8):
    cert = make_cert(hg8, 0.25)
    grid = induced_grid(cert, hg8.axes)
    # every box must be a union of grid cells: each side is a union of pieces
    for box in cert.boxes:
        for side, factor in zip(box, grid.factors):
            side = set(side)
            for sup in factor.supports():
                inter = side & set(sup.tolist())
                assert inter == set() or inter == set(sup.tolist())


def test_oracle_equivalence_small_sample():
    # spot-check of the acceptance criterion on a small slice
    values = [0.0, 0.5, 1.0]
    mus = [uniform(3, "x"), uniform(3, "y")]
    axes = (mus[0].axis, mus[1].axis)
    rng = np.random.default_rng(0)
    for _ in range(50):
        vals = rng.choice(values, size=(3, 3))
        phi = FuzzyPredicate(axes, vals)
        out = seh_bruteforce(phi, mus, 0.5, 1 / 3)
        assert (out.rectangle is not None) == exhaustive_seh_exists(phi, mus, 0.5, 1 / 3)
