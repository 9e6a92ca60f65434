import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuzzyreg.core import (
    Axis,
    AxisMismatchError,
    DegenerateLocalizationError,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    PartitionOfUnity,
    expectation,
    localize,
    morley_product,
    oscillation,
    permutation_invariance_check,
)
from fuzzyreg.instances import constant_matrix, half_graph


def unit_matrix(rows, cols):
    return arrays(np.float64, (rows, cols), elements=st.floats(0.0, 1.0))


def test_predicate_validation():
    with pytest.raises(ValueError):
        FuzzyPredicate.from_array(np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError):
        FuzzyPredicate((Axis("x", 3),), np.zeros(2))


def test_measure_validation():
    ax = Axis("x", 3)
    with pytest.raises(ValueError):
        DiscreteMeasure(ax, np.array([0.5, 0.5, 0.1]))
    with pytest.raises(ValueError):
        DiscreteMeasure(ax, np.array([0.9, 0.2, -0.1]))
    assert DiscreteMeasure.dirac(ax, 1).support().tolist() == [1]


def test_expectation_constant():
    phi = constant_matrix(4)
    mus = [DiscreteMeasure.uniform(ax) for ax in phi.axes]
    assert expectation(phi, mus) == pytest.approx(0.7, abs=1e-12)


def test_expectation_diagonal_and_half_graph():
    diag = FuzzyPredicate.from_array(np.eye(4))
    mus = [DiscreteMeasure.uniform(ax) for ax in diag.axes]
    assert expectation(diag, mus) == pytest.approx(0.25, abs=1e-12)
    hg = half_graph(4)
    mus = [DiscreteMeasure.uniform(ax) for ax in hg.axes]
    # oracle: exhaustive double sum
    brute = sum(
        hg.values[i, j] * 0.25 * 0.25 for i in range(4) for j in range(4)
    )
    assert brute == pytest.approx(6 / 16)
    assert expectation(hg, mus) == pytest.approx(brute, abs=1e-12)


def test_expectation_axis_mismatch_names_axis():
    hg = half_graph(4)
    wrong = DiscreteMeasure.uniform(Axis("z", 4))
    with pytest.raises(AxisMismatchError, match="x"):
        expectation(hg, [wrong, DiscreteMeasure.uniform(hg.axes[1])])


@given(unit_matrix(3, 4), st.floats(0.0, 1.0))
def test_expectation_multilinear(values, alpha):
    phi = FuzzyPredicate.from_array(values)
    ax0, ax1 = phi.axes
    mu = DiscreteMeasure(ax0, np.array([0.5, 0.3, 0.2]))
    mu2 = DiscreteMeasure(ax0, np.array([0.1, 0.1, 0.8]))
    nu = DiscreteMeasure.uniform(ax1)
    blend = DiscreteMeasure(ax0, alpha * mu.weights + (1 - alpha) * mu2.weights)
    left = expectation(phi, [blend, nu])
    right = alpha * expectation(phi, [mu, nu]) + (1 - alpha) * expectation(phi, [mu2, nu])
    assert left == pytest.approx(right, abs=1e-9)


@given(unit_matrix(4, 5))
def test_expectation_between_min_and_max(values):
    phi = FuzzyPredicate.from_array(values)
    mus = [DiscreteMeasure.uniform(ax) for ax in phi.axes]
    e = expectation(phi, mus)
    assert values.min() - 1e-12 <= e <= values.max() + 1e-12


def test_morley_product_examples(hg4, u4, u4y):
    assert morley_product(u4, u4y, hg4) == pytest.approx(0.375, abs=1e-12)
    d0 = DiscreteMeasure.dirac(hg4.axes[0], 1)
    d1 = DiscreteMeasure.dirac(hg4.axes[1], 3)
    assert morley_product(d0, d1, hg4) == hg4.values[1, 3]
    const = constant_matrix(4, 0.3)
    m = DiscreteMeasure(const.axes[0], np.array([1.0, 0, 0, 0]))
    assert morley_product(m, DiscreteMeasure.uniform(const.axes[1]), const) == pytest.approx(0.3)


@given(unit_matrix(3, 5))
def test_morley_commutes_with_transpose(values):
    phi = FuzzyPredicate.from_array(values)
    mu = DiscreteMeasure(phi.axes[0], np.array([0.2, 0.5, 0.3]))
    nu = DiscreteMeasure.uniform(phi.axes[1])
    lhs = morley_product(mu, nu, phi)
    rhs = morley_product(nu, mu, phi.transpose())
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs == pytest.approx(expectation(phi, [mu, nu]), abs=1e-12)


def test_oscillation_examples(hg4):
    const = constant_matrix(4)
    assert oscillation(const, [[0, 2], [1, 3]]) == 0.0
    assert oscillation(hg4, [[0, 1], [2, 3]]) == 0.0  # all entries 1
    assert oscillation(hg4, [range(4), range(4)]) == 1.0
    with pytest.raises(ValueError, match="empty support"):
        oscillation(hg4, [[], [0]])


def test_localize_examples(u4):
    same = localize(u4, np.ones(4))
    assert np.allclose(same.weights, u4.weights)
    half = localize(u4, np.array([1.0, 1.0, 0.0, 0.0]))
    assert np.allclose(half.weights, [0.5, 0.5, 0, 0])
    skew = localize(u4, np.array([1.0, 0.5, 0.0, 0.0]))
    assert np.allclose(skew.weights, [2 / 3, 1 / 3, 0, 0])
    with pytest.raises(DegenerateLocalizationError):
        localize(u4, np.zeros(4))


@given(
    arrays(np.float64, 4, elements=st.floats(0.0, 1.0)),
    arrays(np.float64, 4, elements=st.floats(0.0, 1.0)),
)
def test_localize_composes(theta1, theta2):
    mu = DiscreteMeasure.uniform(Axis("x", 4))
    try:
        once = localize(localize(mu, theta1), theta2)
        direct = localize(mu, theta1 * theta2)
    except DegenerateLocalizationError:
        return
    assert np.allclose(once.weights, direct.weights, atol=1e-9)


def test_permutation_invariance(u4):
    ax = u4.axis
    hg = FuzzyPredicate((ax, ax), half_graph(4).values)
    assert permutation_invariance_check(hg, u4, 2, (1, 0)) <= 1e-12
    sym = FuzzyPredicate((ax, ax), (half_graph(4).values + half_graph(4).values.T))
    assert permutation_invariance_check(sym, u4, 2, (1, 0)) <= 1e-12
    one = FuzzyPredicate((ax,), np.linspace(0, 1, 4))
    assert permutation_invariance_check(one, u4, 1, (0,)) == 0.0
    with pytest.raises(AxisMismatchError):
        permutation_invariance_check(half_graph(4), u4, 2, (1, 0))


def test_partition_of_unity_modes():
    ax = Axis("x", 3)
    ok = PartitionOfUnity(ax, np.array([[0.5, 1.0, 0.0], [0.5, 0.0, 1.0]]))
    assert ok.size == 2
    with pytest.raises(ValueError):
        PartitionOfUnity(ax, np.array([[0.5, 1.0, 0.0], [0.4, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        PartitionOfUnity(ax, np.array([[0.5, 1.0, 0.0], [0.5, 0.0, 1.0]]), "constructible")
    con = PartitionOfUnity(ax, np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), "constructible")
    assert [s.tolist() for s in con.supports()] == [[0, 1], [2]]


def test_grid_partition_pointwise_sum():
    ax = Axis("x", 3)
    pou = PartitionOfUnity(ax, np.array([[0.25, 1.0, 0.0], [0.75, 0.0, 1.0]]))
    grid = GridPartition((pou, pou))
    assert np.allclose(grid.pointwise_sum(), 1.0, atol=1e-9)
    total = np.zeros((3, 3))
    for cell in grid.cells():
        total += grid.cell_weight(cell)
    assert np.allclose(total, 1.0, atol=1e-9)
