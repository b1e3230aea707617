import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavefrac import reference


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_nodal_basis_is_kronecker_at_nodes(degree):
    nodes = reference.gauss_lobatto(degree + 1)
    pts = np.column_stack([np.tile(nodes, degree + 1), np.repeat(nodes, degree + 1)])
    val, _ = reference.tensor_basis(degree, pts)
    assert np.allclose(val, np.eye(len(pts)), atol=1e-14)


@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 3))
def test_partition_of_unity(x, y, degree):
    val, grad = reference.tensor_basis(degree, np.array([[x, y]]))
    assert val.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_gauss_exact_to_degree(n):
    x, w = reference.gauss(n)
    for p in range(2 * n):
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert np.dot(w, x ** p) == pytest.approx(exact, abs=1e-14)


def test_q1_shape_matches_degree_one_basis():
    pts, _ = reference.tensor_gauss(3)
    val, _ = reference.q1_shape(pts)
    tb, _ = reference.tensor_basis(1, pts)
    # Q1 corners are counterclockwise, tensor nodes are lexicographic
    assert np.allclose(val, tb[:, [0, 1, 3, 2]])
