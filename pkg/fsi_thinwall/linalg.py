"""Sparse matrix construction and direct factorizations.

Both time-step systems have constant coefficients, so each run factors them once with
SuperLU (COLAMD column ordering) and reuses the factors for every step. SuperLU solves
only read the factors, but they are documented as externally serialized: share a
Factorization between threads only behind a lock.
"""

import hashlib
import logging
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-14


class SingularSystemError(RuntimeError):
    """Raised when a system matrix is numerically singular."""

    def __init__(self, label: str, detail: str = ""):
        self.label = label
        message = f"Singular system matrix in step '{label}'"
        if detail:
            message += f": {detail}"
        super().__init__(message)


def from_triplets(n: int, entries: Iterable[Tuple[int, int, float]]) -> sp.csr_matrix:
    """Build an n x n CSR matrix, summing duplicate entries.

    Args:
        n: Dimension
        entries: (row, col, value) triplets

    Returns:
        CSR matrix with sorted, unique column indices per row

    Raises:
        ValueError: If an index is out of range
    """
    entries = list(entries)
    if not entries:
        return sp.csr_matrix((n, n))
    rows, cols, vals = (np.asarray(x) for x in zip(*entries))
    bad = (rows < 0) | (rows >= n) | (cols < 0) | (cols >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(f"Triplet index ({rows[k]}, {cols[k]}) out of range for dimension {n}")
    mat = sp.coo_matrix((vals.astype(float), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def fingerprint(*arrays: np.ndarray) -> str:
    """SHA-1 fingerprint of the raw bytes of one or more arrays."""
    digest = hashlib.sha1()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()


def matrix_fingerprint(A: sp.spmatrix) -> str:
    A = sp.csr_matrix(A)
    A.sort_indices()
    return fingerprint(A.indptr, A.indices, A.data)


class Factorization:
    """Sparse LU factorization with partial pivoting and fill-reducing ordering.

    Attributes:
        label: Name of the step that produced the matrix
        shape: Matrix shape
        source_fingerprint: Fingerprint of the factored matrix
    """

    def __init__(self, A: sp.spmatrix, label: str = "system", pivot_tol: float = PIVOT_TOL):
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"Cannot factorize non-square matrix of shape {A.shape} ({label})")
        self.label = label
        self.shape = A.shape
        self.source_fingerprint = matrix_fingerprint(A)
        self._A = A

        if A.shape[0] == 0:
            self._lu = None
            return
        scale = float(abs(A).max()) if A.nnz else 0.0
        if scale == 0.0:
            raise SingularSystemError(label, "matrix is zero")
        try:
            self._lu = splu(A, permc_spec="COLAMD")
        except RuntimeError as e:
            raise SingularSystemError(label, str(e)) from e
        pivots = np.abs(self._lu.U.diagonal())
        if pivots.min() < pivot_tol * scale:
            raise SingularSystemError(
                label, f"pivot {pivots.min():.3e} below {pivot_tol:g} x max entry {scale:.3e}"
            )
        logger.debug(
            f"Factorized '{label}': n={A.shape[0]}, nnz={A.nnz}, "
            f"fill={self._lu.L.nnz + self._lu.U.nnz}"
        )

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(
                f"Right-hand side of length {b.shape[0]} does not match system size {self.shape[0]}"
            )
        if self._lu is None:
            return np.zeros_like(b)
        return self._lu.solve(b)

    def residual(self, x: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(self._A @ x - b))


def factorize(A: sp.spmatrix, label: str = "system", pivot_tol: float = PIVOT_TOL) -> Factorization:
    """Factor a square sparse matrix for repeated solves.

    Args:
        A: Square matrix
        label: Step name reported in errors
        pivot_tol: Relative pivot threshold for singularity detection

    Returns:
        Factorization instance

    Raises:
        SingularSystemError: If the matrix is numerically singular
    """
    return Factorization(A, label, pivot_tol)


class ConstrainedSolver:
    """Solve A x = b with some entries of x prescribed.

    Constrained unknowns are removed from rows and columns; their contribution moves to
    the right-hand side.
    """

    def __init__(
        self,
        A: sp.spmatrix,
        constrained: Optional[np.ndarray] = None,
        label: str = "system",
        pivot_tol: float = PIVOT_TOL,
    ):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        ids = [] if constrained is None else constrained
        constrained = np.unique(np.asarray(ids, dtype=np.int64))
        mask = np.ones(n, dtype=bool)
        mask[constrained] = False
        self.n = n
        self.free = np.flatnonzero(mask)
        self.constrained = constrained
        self.matrix = A
        self._A_fc = A[self.free][:, constrained]
        self.factorization = factorize(A[self.free][:, self.free], label, pivot_tol)

    def solve(self, b: np.ndarray, prescribed: Optional[np.ndarray] = None) -> np.ndarray:
        """Solve with constrained entries taken from the full-length vector ``prescribed``."""
        x = np.zeros(self.n)
        rhs = np.asarray(b, dtype=float)[self.free]
        if self.constrained.size:
            g = np.zeros(self.constrained.size)
            if prescribed is not None:
                g = np.asarray(prescribed, dtype=float)[self.constrained]
            x[self.constrained] = g
            rhs = rhs - self._A_fc @ g
        x[self.free] = self.factorization.solve(rhs)
        return x
