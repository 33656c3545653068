"""Tests for NNCT construction and marginals."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from segstat import (
    NNCT,
    PointSet,
    ValidationError,
    apply_outer_buffer,
    apply_toroidal,
    build_nn_graph,
    build_nnct,
)

UNIT = (0.0, 0.0, 1.0, 1.0)


def random_points(seed, n, region=UNIT, q=2):
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = region
    coords = rng.uniform((xmin, ymin), (xmax, ymax), (n, 2))
    labels = rng.integers(0, q, n)
    labels[:q] = np.arange(q)
    return PointSet(coords, labels, region)


def test_collinear_table():
    # points 0,1 are class 0 and point 2 is class 1; nn = [1, 0, 1]
    # pairs: (0,0), (0,0), (1,0) -> N = [[2, 0], [1, 0]]
    pts = PointSet([(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)], [0, 0, 1], (0, 0, 3, 1))
    table = build_nnct(build_nn_graph(pts), pts.labels)
    assert_array_equal(table.counts, [[2, 0], [1, 0]])
    assert table.n == 3
    assert_array_equal(table.row_sums, [2, 1])
    assert_array_equal(table.col_sums, [3, 0])


def test_ingested_table_marginals():
    table = NNCT([[149, 33], [43, 48]])
    assert table.n == 273
    assert table.q == 2
    assert_array_equal(table.row_sums, [182, 91])
    assert_array_equal(table.col_sums, [192, 81])
    assert_allclose(table.pi_hat, np.array([[149, 33], [43, 48]]) / 273)
    assert_allclose(table.nu_hat, [182 / 273, 91 / 273])
    assert_allclose(table.kappa_hat, [192 / 273, 81 / 273])


def test_single_class_table():
    pts = PointSet([(0.1, 0.1), (0.2, 0.2), (0.8, 0.9)], [0, 0, 0], UNIT)
    table = build_nnct(build_nn_graph(pts), pts.labels)
    assert_array_equal(table.counts, [[3]])
    assert table.q == 1


def test_nnct_validation():
    with pytest.raises(ValidationError):
        NNCT([[1, 2, 3], [4, 5, 6]])  # not square
    with pytest.raises(ValidationError):
        NNCT([[1, -2], [3, 4]])  # negative count
    with pytest.raises(ValidationError):
        NNCT(np.zeros((0, 0), dtype=int))  # empty


def test_row_sums_equal_class_sizes_uncorrected():
    pts = random_points(1, 120, q=3)
    table = build_nnct(build_nn_graph(pts), pts.labels)
    assert_array_equal(table.row_sums, pts.class_sizes)
    assert table.n == pts.n


def test_row_sums_equal_base_class_sizes_outer_buffer():
    pts = random_points(2, 150, region=(-0.5, -0.5, 1.5, 1.5))
    graph = apply_outer_buffer(pts, UNIT)
    table = build_nnct(graph, pts.labels)
    expected = np.bincount(pts.labels[graph.base_mask], minlength=2)
    assert_array_equal(table.row_sums, expected)
    assert table.n == graph.n_bases


def test_toroidal_row_sums_single_class():
    pts = random_points(3, 40, q=1)
    table = build_nnct(apply_toroidal(pts), pts.labels)
    assert_array_equal(table.counts, [[40]])


def test_label_permutation_transposes_table():
    # swapping the two class ids transposes and reverses the table
    pts = random_points(4, 90)
    graph = build_nn_graph(pts)
    table = build_nnct(graph, pts.labels)
    swapped = build_nnct(graph, 1 - pts.labels)
    assert_array_equal(swapped.counts, table.counts[::-1, ::-1])


def test_explicit_q_pads_table():
    pts = random_points(5, 30, q=2)
    table = build_nnct(build_nn_graph(pts), pts.labels, q=4)
    assert table.q == 4
    assert_array_equal(table.counts[2:, :], 0)
    assert_array_equal(table.counts[:, 2:], 0)


def test_build_nnct_label_validation():
    pts = random_points(6, 20)
    graph = build_nn_graph(pts)
    with pytest.raises(ValidationError):
        build_nnct(graph, pts.labels[:-1])  # wrong length
    with pytest.raises(ValidationError):
        build_nnct(graph, pts.labels, q=1)  # q below observed labels


@st.composite
def distinct_point_sets(draw):
    pts = draw(
        st.lists(
            st.tuples(st.integers(0, 40), st.integers(0, 40)),
            min_size=2,
            max_size=40,
            unique=True,
        )
    )
    coords = np.asarray(pts, dtype=float) / 40.0
    labels = draw(st.lists(st.integers(0, 3), min_size=len(pts), max_size=len(pts)))
    return PointSet(coords, labels, UNIT)


@given(distinct_point_sets())
@settings(max_examples=50, deadline=None)
def test_property_marginal_consistency(pts):
    table = build_nnct(build_nn_graph(pts), pts.labels)
    assert table.counts.sum() == pts.n
    assert_array_equal(table.row_sums, pts.class_sizes)
    assert_allclose(table.pi_hat.sum(), 1.0)
    assert_allclose(table.nu_hat.sum(), 1.0)
    assert_allclose(table.kappa_hat.sum(), 1.0)
