from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from gelflow import fem
from gelflow.errors import RankDeficiencyError, SingularMatrixError
from gelflow.linsolve import (AugmentedSolver, AugmentedSystem, as_csr, check_csr, dense_oracle, solve_augmented,
                              solve_sparse)
from gelflow.mesh import gen_rect_mesh
from gelflow.model import MaterialParams
from gelflow.scheme import Discretization


def residual_ok(A, x, b):
    A = sp.csr_matrix(A)
    return np.linalg.norm(A @ x - b) <= 1e-10 * (abs(A).sum(axis=1).max() * np.linalg.norm(x) + np.linalg.norm(b))


def poisson1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_identity():
    b = np.arange(5.0)
    assert np.array_equal(solve_sparse(sp.identity(5), b), b)
    assert np.array_equal(dense_oracle(np.eye(5), b), b)


def test_poisson_matches_oracle():
    A, b = poisson1d(4), np.ones(4)
    x = solve_sparse(A, b)
    assert np.abs(x - dense_oracle(A, b)).max() <= 1e-12
    assert np.allclose(x, [2, 3, 3, 2])
    assert residual_ok(A, x, b)


def test_zero_row_is_singular():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 0.0]]))
    with pytest.raises(SingularMatrixError) as exc:
        solve_sparse(A, np.ones(2))
    assert exc.value.location == 1


def test_structurally_singular():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve_sparse(A, np.ones(2))
    with pytest.raises(SingularMatrixError):
        dense_oracle(A, np.ones(2))


def test_hilbert_exact_inverse():
    H = [[Fraction(1, i + j + 1) for j in range(3)] for i in range(3)]
    b = [Fraction(1), Fraction(2), Fraction(3)]
    # exact inverse of the 3x3 Hilbert matrix
    Hinv = [[9, -36, 30], [-36, 192, -180], [30, -180, 180]]
    x_exact = [sum(Hinv[i][k] * b[k] for k in range(3)) for i in range(3)]
    assert all(sum(H[i][k] * x_exact[k] for k in range(3)) == b[i] for i in range(3))
    x = dense_oracle(np.array(H, dtype=float), np.array(b, dtype=float))
    assert np.abs(x - np.array(x_exact, dtype=float)).max() <= 1e-8


def test_csr_invariants():
    A = as_csr(sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2)))
    check_csr(A)
    assert A[0, 1] == 3.0
    bad = sp.csr_matrix((np.ones(2), np.array([1, 0]), np.array([0, 2, 2])), shape=(2, 2))
    with pytest.raises(ValueError):
        check_csr(bad)


def test_symmetric_residual():
    A = poisson1d(30) + sp.identity(30) * 0.1
    b = np.random.default_rng(0).standard_normal(30)
    x = solve_sparse(A, b)
    assert residual_ok(A, x, b) and residual_ok(A.T, x, b)


def test_augmented_kernel_pinning():
    m = gen_rect_mesh(4, 4)
    S = fem.assemble_stiffness_p1(m)
    row = fem.assemble_moment_rows(m, fem.DofMap.vector_p2(m), fem.DofMap.p1(m)).mean_ptilde
    x, lam = solve_augmented(AugmentedSystem(S, row, [3.0], np.zeros(S.shape[0])))
    assert np.allclose(x, 3.0, atol=1e-12)
    assert abs(lam[0]) <= 1e-12


def test_augmented_constraints_satisfied_and_order_invariant():
    rng = np.random.default_rng(4)
    A = poisson1d(12)
    C = rng.standard_normal((3, 12))
    c = rng.standard_normal(3)
    b = rng.standard_normal(12)
    x, lam = solve_augmented(AugmentedSystem(A, C, c, b))
    assert np.abs(C @ x - c).max() <= 1e-10
    # core equations hold on the null space of C
    N = np.linalg.svd(C)[2][3:].T
    assert np.abs(N.T @ (A @ x - b)).max() <= 1e-10
    perm = [2, 0, 1]
    x2, lam2 = solve_augmented(AugmentedSystem(A, C[perm], c[perm], b))
    assert np.abs(x - x2).max() <= 1e-12
    assert np.allclose(lam2, lam[perm])


def test_contradictory_constraints():
    m = gen_rect_mesh(2, 2)
    S = fem.assemble_stiffness_p1(m)
    row = fem.assemble_mass_p1(m) @ np.ones(9)
    with pytest.raises(RankDeficiencyError):
        solve_augmented(AugmentedSystem(S, np.vstack([row, row]), [0.0, 1.0], np.zeros(9)))


def test_insufficient_constraints_rank_deficient():
    m = gen_rect_mesh(2, 2)
    d = Discretization(m, MaterialParams(1, 1, 0, 1))
    # one translation pin leaves the y translation free
    with pytest.raises(RankDeficiencyError):
        AugmentedSolver(d.stokes_matrix(), d.pin_rows()[:1])


def test_every_2x2_system_matches_oracle():
    m = gen_rect_mesh(2, 2)
    d = Discretization(m, MaterialParams.pnipa())
    rng = np.random.default_rng(5)
    K = AugmentedSystem(d.stokes_matrix(), d.pin_rows(), [0, 0], np.zeros(d.nu + d.np)).matrix()
    for A in (K, d.diffusion_matrix(0.01), d.M, d.A + sp.identity(d.nu)):
        b = rng.standard_normal(A.shape[0])
        x, xd = solve_sparse(A, b), dense_oracle(A, b)
        assert np.linalg.norm(x - xd) <= 1e-10 * np.linalg.norm(xd)
