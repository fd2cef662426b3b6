import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import explicit_projection, pattern_by_steps, walsh_by_sorting
from walshdm.walsh import (
    build_basis,
    pattern_matrix,
    project,
    project_stack,
    reconstruct,
    sequency_permutation,
    sign_changes,
)


def test_order_two_columns():
    b = build_basis(2, 4)
    expected = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, -1, 1], [1, -1, 1, -1]]).T
    np.testing.assert_array_equal(b.gamma, expected)


def test_order_one_columns():
    np.testing.assert_array_equal(build_basis(1, 2).gamma, [[1, 1], [1, -1]])


def test_order_three_column_five_has_four_sign_changes():
    assert sign_changes(build_basis(3, 8).gamma[:, 4]) == 4


@pytest.mark.parametrize("order", range(1, 9))
def test_matches_sorted_hadamard(order):
    n = 1 << order
    np.testing.assert_array_equal(build_basis(order, n).gamma, walsh_by_sorting(order))


@pytest.mark.parametrize("order", range(1, 8))
def test_sequency_and_orthogonality(order):
    n = 1 << order
    g = build_basis(order, n).gamma.astype(np.int64)
    assert [sign_changes(g[:, i]) for i in range(n)] == list(range(n))
    np.testing.assert_array_equal(g.T @ g, n * np.eye(n, dtype=np.int64))
    assert sorted(sequency_permutation(order).tolist()) == list(range(n))


def test_truncation_keeps_leading_columns():
    full, part = build_basis(5, 32), build_basis(5, 7)
    np.testing.assert_array_equal(part.gamma, full.gamma[:, :7])


@pytest.mark.parametrize("args", [(0, 1), (3, 0), (3, 9), (13, 1), (-1, 1)])
def test_build_basis_rejects(args):
    with pytest.raises(ValueError):
        build_basis(*args)


def test_pattern_examples():
    b = build_basis(2, 4)
    np.testing.assert_array_equal(pattern_matrix(b, 1, 1), np.ones((4, 4)))
    z12 = pattern_matrix(b, 1, 2)
    for row in z12:
        np.testing.assert_array_equal(row, [1, 1, -1, -1])
    np.testing.assert_array_equal(pattern_matrix(b, 3, 2), pattern_matrix(b, 3, 1) * pattern_matrix(b, 1, 2))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_outer_product_identity_exhaustive(order):
    n = 1 << order
    b = build_basis(order, n)
    Z = pattern_by_steps(walsh_by_sorting(order), n)
    for (p, q), z in Z.items():
        np.testing.assert_array_equal(pattern_matrix(b, p, q), z)
        np.testing.assert_array_equal(z, np.outer(b.gamma[:, p - 1], b.gamma[:, q - 1]))


def test_pattern_index_errors():
    b = build_basis(3, 4)
    for p, q in [(0, 1), (1, 5), (5, 1)]:
        with pytest.raises(IndexError):
            pattern_matrix(b, p, q)


def test_project_single_pattern():
    b = build_basis(4, 6)
    a = project(b, pattern_matrix(b, 3, 3))
    expected = np.zeros(36)
    expected[b.index(3, 3)] = 1.0
    np.testing.assert_array_equal(a, expected)


def test_stacking_order_is_column_major():
    b = build_basis(3, 3)
    assert [b.index(p, q) for q in (1, 2, 3) for p in (1, 2, 3)] == list(range(9))


def test_project_checkerboard_recipe():
    b = build_basis(6, 8)
    w = -pattern_matrix(b, 1, 1) - 0.1 * pattern_matrix(b, 2, 2) + 0.2 * pattern_matrix(b, 3, 3)
    a = project(b, w)
    want = {(1, 1): -1.0, (2, 2): -0.1, (3, 3): 0.2}
    for p in range(1, 9):
        for q in range(1, 9):
            assert abs(a[b.index(p, q)] - want.get((p, q), 0.0)) <= 1e-12


@pytest.mark.parametrize("order,M", [(2, 3), (3, 8), (4, 5), (5, 12)])
def test_separable_equals_explicit(order, M):
    rng = np.random.default_rng(order * 100 + M)
    b = build_basis(order, M)
    Pi = explicit_projection(walsh_by_sorting(order), M)
    w = rng.normal(size=(b.n, b.n))
    np.testing.assert_allclose(project(b, w), Pi @ w.ravel(order="F"), rtol=0, atol=1e-12)


def test_full_basis_round_trip():
    rng = np.random.default_rng(5)
    b = build_basis(5, 32)
    w = rng.normal(size=(32, 32))
    np.testing.assert_allclose(reconstruct(b, project(b, w)), w, rtol=0, atol=1e-12)


def test_reconstruct_trivial():
    b = build_basis(3, 4)
    np.testing.assert_array_equal(reconstruct(b, np.zeros(16)), np.zeros((8, 8)))
    a = np.zeros(16)
    a[0] = 2.5
    np.testing.assert_array_equal(reconstruct(b, a), np.full((8, 8), 2.5))


def test_dimension_mismatch():
    b = build_basis(3, 4)
    with pytest.raises(ValueError):
        project(b, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        reconstruct(b, np.zeros(15))


def test_project_stack_matches_project():
    rng = np.random.default_rng(2)
    b = build_basis(4, 7)
    ws = rng.normal(size=(5, 16, 16))
    stacked = project_stack(b, ws)
    for k in range(5):
        np.testing.assert_allclose(stacked[:, k], project(b, ws[k]), atol=1e-13)


surfaces = arrays(np.float64, (16, 16), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False))


@settings(max_examples=40, deadline=None)
@given(w=surfaces, M=st.integers(1, 16))
def test_projection_left_inverse(w, M):
    b = build_basis(4, M)
    a = project(b, w)
    np.testing.assert_allclose(project(b, reconstruct(b, a)), a, rtol=0, atol=1e-12 * (1 + np.abs(a).max()))


@settings(max_examples=40, deadline=None)
@given(w=surfaces)
def test_parseval_full_basis(w):
    b = build_basis(4, 16)
    a = project(b, w)
    lhs = np.sum(w * w) / 256
    assert abs(lhs - a @ a) <= 1e-12 * max(1.0, lhs)
