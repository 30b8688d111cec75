"""Direct sparse solves, Lagrange-multiplier constrained solves, and a dense oracle.

Sparse matrices are ``scipy.sparse.csr_matrix``; factorization is SuperLU
with partial pivoting. :func:`dense_oracle` is a separate hand-written
elimination used only to cross-check the sparse path in tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import RankDeficiencyError, SingularMatrixError


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR: sorted column indices, no duplicates."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(A: sp.csr_matrix):
    """Validate the compressed-row invariants (monotone offsets, sorted in-range columns)."""
    ptr, idx = A.indptr, A.indices
    if ptr[0] != 0 or np.any(np.diff(ptr) < 0) or ptr[-1] != len(idx):
        raise ValueError("row offsets are not monotone")
    if len(idx) and (idx.min() < 0 or idx.max() >= A.shape[1]):
        raise ValueError("column index out of range")
    for r in range(A.shape[0]):
        row = idx[ptr[r]:ptr[r + 1]]
        if np.any(np.diff(row) <= 0):
            raise ValueError(f"row {r}: column indices not strictly increasing")


class Factorization:
    """LU factors of a square sparse matrix, reusable for many right-hand sides."""

    def __init__(self, A):
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.A = A
        empty_rows = np.flatnonzero(np.diff(A.indptr) == 0)
        if empty_rows.size:
            raise SingularMatrixError(f"row {empty_rows[0]} is empty", location=int(empty_rows[0]))
        empty_cols = np.setdiff1d(np.arange(A.shape[1]), A.indices)
        if empty_cols.size:
            raise SingularMatrixError(f"column {empty_cols[0]} is empty", location=int(empty_cols[0]))
        try:
            self._lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(f"factorization failed: {exc}") from exc
        diag = np.abs(self._lu.U.diagonal())
        scale = abs(A).max() if A.nnz else 0.0
        tiny = np.flatnonzero(diag <= 1e-14 * scale)
        if tiny.size:
            raise SingularMatrixError(f"zero pivot at position {tiny[0]}", location=int(tiny[0]))

    def solve(self, b, refine: int = 1) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        x = self._lu.solve(b)
        for _ in range(refine):
            x = x + self._lu.solve(b - self.A @ x)
        return x


def solve_sparse(A, b) -> np.ndarray:
    """Solve ``A x = b`` by sparse LU with one step of iterative refinement."""
    return Factorization(A).solve(b)


@dataclass
class AugmentedSystem:
    """Core equations plus dense constraint rows: ``[[A, C^T], [C, 0]]``."""

    core: sp.spmatrix
    constraints: np.ndarray  # (k, n)
    constraint_rhs: np.ndarray  # (k,)
    rhs: np.ndarray  # (n,)

    def __post_init__(self):
        self.constraints = np.atleast_2d(np.asarray(self.constraints, dtype=float))
        self.constraint_rhs = np.atleast_1d(np.asarray(self.constraint_rhs, dtype=float))
        n = self.core.shape[0]
        if self.core.shape != (n, n):
            raise ValueError("core block must be square")
        if self.constraints.shape[1] != n or len(self.constraint_rhs) != len(self.constraints):
            raise ValueError("constraint rows do not match the core size")

    def matrix(self) -> sp.csr_matrix:
        C = sp.csr_matrix(self.constraints)
        k = C.shape[0]
        return as_csr(sp.bmat([[self.core, C.T], [C, sp.csr_matrix((k, k))]]))


class AugmentedSolver:
    """Factor ``[[A, C^T], [C, 0]]`` once; solve for many right-hand sides."""

    def __init__(self, core, constraints):
        C = np.atleast_2d(np.asarray(constraints, dtype=float))
        gram = C @ C.T
        if np.linalg.matrix_rank(gram, tol=1e-12 * max(np.abs(gram).max(), 1e-300)) < len(C):
            raise RankDeficiencyError("constraint rows are linearly dependent")
        self.n = core.shape[0]
        self.k = len(C)
        self.C = C
        K = AugmentedSystem(core, C, np.zeros(self.k), np.zeros(self.n)).matrix()
        try:
            self._fac = Factorization(K)
        except SingularMatrixError as exc:
            raise RankDeficiencyError(f"augmented matrix is singular ({exc})") from exc

    def solve(self, rhs, constraint_rhs):
        """Returns ``(x, multipliers)``."""
        full = np.concatenate([np.asarray(rhs, float), np.atleast_1d(np.asarray(constraint_rhs, float))])
        sol = self._fac.solve(full)
        return sol[: self.n], sol[self.n:]


def solve_augmented(system: AugmentedSystem):
    """Solve the constrained system; returns ``(x, multipliers)``."""
    return AugmentedSolver(system.core, system.constraints).solve(system.rhs, system.constraint_rhs)


def dense_oracle(A, b, block: int = 128) -> np.ndarray:
    """Blocked right-looking Gaussian elimination with partial pivoting on a dense
    copy, then forward and back substitution (test oracle).

    Written independently of the sparse factorization; BLAS is used only for
    the matrix products of the trailing-block updates.
    """
    A = np.array(A.toarray() if sp.issparse(A) else A, dtype=float, order="C")
    b = np.array(b, dtype=float)
    n = len(A)
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = np.abs(A).max() if A.size else 0.0
    perm = np.arange(n)
    for k0 in range(0, n, block):
        k1 = min(k0 + block, n)
        # unblocked elimination of the panel A[k0:, k0:k1]
        for k in range(k0, k1):
            p = k + int(np.argmax(np.abs(A[k:, k])))
            if abs(A[p, k]) <= 1e-14 * scale:
                raise SingularMatrixError(f"zero pivot in column {k}", location=k)
            if p != k:
                A[[k, p]] = A[[p, k]]
                perm[[k, p]] = perm[[p, k]]
            A[k + 1:, k] /= A[k, k]
            A[k + 1:, k + 1:k1] -= np.outer(A[k + 1:, k], A[k, k + 1:k1])
        if k1 == n:
            break
        # U12 = L11^{-1} A12 by forward substitution within the panel
        for k in range(k0, k1):
            A[k + 1:k1, k1:] -= np.outer(A[k + 1:k1, k], A[k, k1:])
        # trailing update A22 -= L21 U12, in column chunks to bound memory
        L21 = A[k1:, k0:k1]
        for j0 in range(k1, n, 1024):
            j1 = min(j0 + 1024, n)
            A[k1:, j0:j1] -= L21 @ A[k0:k1, j0:j1]
    y = b[perm]
    for k in range(n):
        y[k] -= A[k, :k] @ y[:k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (y[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x
