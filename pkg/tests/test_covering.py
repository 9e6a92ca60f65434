import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuzzyreg.covering import (
    COLUMNS,
    ROWS,
    cover_partition,
    covering_number,
    linf_cover,
    minimal_cover_size,
    partition_homogeneity,
)
from fuzzyreg.instances import constant_matrix, half_graph


def brute_minimal_cover_1d(points, eps):
    """Independent oracle: sweep covering of sorted reals by width-2eps windows."""
    pts = sorted(points)
    count, i = 0, 0
    while i < len(pts):
        count += 1
        right = pts[i] + 2 * eps
        while i < len(pts) and pts[i] <= right + 1e-12:
            i += 1
    return count


def test_identical_vectors_one_center():
    vecs = np.tile([0.3, 0.6], (5, 1))
    assert linf_cover(vecs, 0.1).size == 1


def test_three_points_minimal_cover_is_two():
    pts = np.array([[0.0], [0.5], [1.0]])
    # oracle first: exhaustive 1-D sweep gives 2 free-center balls
    assert brute_minimal_cover_1d([0.0, 0.5, 1.0], 0.3) == 2
    assert minimal_cover_size(pts, 0.3) == 2
    # the greedy input-center cover needs 3 here and must still be a valid cover
    cov = linf_cover(pts, 0.3)
    assert cov.size == 3
    assert cov.covered.all()


def test_eps_one_single_center():
    vecs = np.random.default_rng(0).random((7, 3))
    assert linf_cover(vecs, 1.0).size == 1


@given(arrays(np.float64, (6, 2), elements=st.floats(0.0, 1.0)), st.floats(0.05, 0.9))
def test_greedy_cover_is_valid_and_yields_input_centers(vecs, eps):
    cov = linf_cover(vecs, eps)
    assert cov.covered.all()
    assert all(0 <= c < len(vecs) for c in cov.center_indices)
    dists = np.stack([np.max(np.abs(vecs - vecs[c]), axis=1) for c in cov.center_indices])
    assert (dists.min(axis=0) <= eps + 1e-9).all()


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8), st.floats(0.05, 0.6))
def test_minimal_cover_matches_1d_sweep(points, eps):
    got = minimal_cover_size(np.array(points)[:, None], eps)
    assert got == brute_minimal_cover_1d(set(points), eps)


def test_covering_number_constant():
    const = constant_matrix(5)
    assert covering_number(const, 0.2, 3, ROWS, "exact") == 1
    assert covering_number(const, 0.2, 3, COLUMNS, "exact") == 1


def test_covering_number_half_graph_exact():
    hg = half_graph(4)
    assert covering_number(hg, 0.25, 2, ROWS, "exact") == 3
    assert covering_number(hg, 1.0, 2, ROWS, "exact") == 1


def test_covering_number_saturates_beyond_axis():
    hg = half_graph(4)
    full = covering_number(hg, 0.25, 4, COLUMNS, "exact")
    beyond = covering_number(hg, 0.25, 64, COLUMNS, "exact")
    assert beyond == full


def test_covering_number_greedy_upper_bounds_exact():
    hg = half_graph(6)
    exact = covering_number(hg, 0.3, 3, ROWS, "exact")
    greedy = covering_number(hg, 0.3, 3, ROWS, "greedy", samples=64)
    assert greedy >= exact


def test_covering_number_input_validation():
    hg = half_graph(4)
    with pytest.raises(ValueError):
        covering_number(hg, -0.1, 2)
    with pytest.raises(ValueError):
        covering_number(hg, 0.2, 0)


def test_cover_partition_constant_single_piece():
    const = constant_matrix(4)
    part = cover_partition(const, [0, 1], 0.3, "definable")
    assert part.size == 1
    assert np.allclose(part.pieces, 1.0)


def test_cover_partition_half_graph_example(hg4):
    part = cover_partition(hg4, [1, 3], 0.5, "constructible")
    assert part.size == 3
    assert [s.tolist() for s in part.supports()] == [[0], [1, 2], [3]]


def test_cover_partition_eps_two_single_piece(hg4):
    part = cover_partition(hg4, [0, 1, 2, 3], 2.0, "constructible")
    assert part.size == 1


@pytest.mark.parametrize("mode", ["definable", "constructible"])
def test_cover_partition_pieces_homogeneous(hg8, mode):
    cols = [1, 3, 6]
    eps = 0.5
    part = cover_partition(hg8, cols, eps, mode)
    assert partition_homogeneity(hg8, part, cols) <= eps + 1e-9
    assert np.allclose(part.pieces.sum(axis=0), 1.0, atol=1e-9)


def test_definable_piece_count_bounded_by_greedy_cover(hg8):
    cols = [0, 2, 5, 7]
    eps = 0.5
    part = cover_partition(hg8, cols, eps, "definable")
    greedy = linf_cover(hg8.values[:, cols], 0.49 * eps)
    assert part.size <= greedy.size


def test_cover_partition_rejects_bad_inputs(hg4):
    with pytest.raises(ValueError, match="nonempty"):
        cover_partition(hg4, [], 0.5)
    with pytest.raises(ValueError, match="unknown"):
        cover_partition(hg4, [9], 0.5)
