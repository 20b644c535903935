"""Tests for sparse assembly helpers and direct solvers."""

import numpy as np
import pytest
import scipy.sparse as sp

from fsi_thinwall.linalg import (
    ConstrainedSolver,
    SingularSystemError,
    factorize,
    fingerprint,
    from_triplets,
    matrix_fingerprint,
)


def test_from_triplets_sums_duplicates():
    """Test that repeated triplets are summed."""
    A = from_triplets(3, [(0, 0, 1.0), (0, 0, 2.0), (2, 1, -1.0), (1, 2, 4.0)])

    assert A.shape == (3, 3)
    assert A[0, 0] == 3.0
    assert A[2, 1] == -1.0
    assert A.nnz == 3


def test_from_triplets_empty_and_out_of_range():
    """Test empty input and out-of-range indices."""
    assert from_triplets(4, []).nnz == 0
    with pytest.raises(ValueError, match="out of range"):
        from_triplets(2, [(0, 2, 1.0)])


def test_factorization_solves_nonsymmetric_system():
    """Test LU solves of a nonsymmetric sparse system."""
    rng = np.random.default_rng(1)
    A = sp.random(30, 30, density=0.2, random_state=1) + 5.0 * sp.eye(30)
    b = rng.standard_normal(30)

    lu = factorize(A, "test")
    x = lu.solve(b)
    assert np.allclose(A @ x, b)
    assert lu.residual(x, b) < 1e-10


def test_singular_matrices_raise():
    """Test detection of zero and rank-deficient matrices."""
    with pytest.raises(SingularSystemError, match="zero"):
        factorize(sp.csr_matrix((3, 3)), "zero_block")
    with pytest.raises(SingularSystemError) as info:
        factorize(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), "fluid")
    assert info.value.label == "fluid"
    assert "fluid" in str(info.value)


def test_factorization_input_checks():
    """Test errors for non-square matrices and mismatched right-hand sides."""
    with pytest.raises(ValueError, match="non-square"):
        factorize(sp.csr_matrix(np.ones((2, 3))))
    lu = factorize(sp.eye(3))
    with pytest.raises(ValueError, match="does not match"):
        lu.solve(np.ones(4))


def test_constrained_solver_keeps_prescribed_values():
    """Test elimination of prescribed unknowns."""
    A = sp.csr_matrix(
        np.array(
            [
                [4.0, -1.0, 0.0, 0.0],
                [-1.0, 4.0, -1.0, 0.0],
                [0.0, -1.0, 4.0, -1.0],
                [0.0, 0.0, -1.0, 4.0],
            ]
        )
    )
    b = np.array([1.0, 2.0, 3.0, 4.0])
    prescribed = np.array([0.5, 0.0, 0.0, -2.0])

    x = ConstrainedSolver(A, np.array([3, 0]), "chain").solve(b, prescribed)
    assert x[0] == 0.5
    assert x[3] == -2.0
    assert np.allclose((A @ x)[1:3], b[1:3])


def test_constrained_solver_defaults_to_homogeneous_data():
    """Test that constrained entries are zero without prescribed data."""
    solver = ConstrainedSolver(2.0 * sp.eye(3), np.array([1]))

    assert np.allclose(solver.solve(np.array([2.0, 5.0, 4.0])), [1.0, 0.0, 2.0])


def test_fingerprints():
    """Test that fingerprints follow content and not storage format."""
    a = np.arange(6.0)
    assert fingerprint(a) == fingerprint(a.copy())
    assert fingerprint(a) != fingerprint(a.reshape(2, 3))
    b = a.copy()
    b[2] += 1e-15
    assert fingerprint(a) != fingerprint(b)

    A = sp.random(5, 5, density=0.4, random_state=0)
    assert matrix_fingerprint(A.tocsr()) == matrix_fingerprint(A.tocoo())
