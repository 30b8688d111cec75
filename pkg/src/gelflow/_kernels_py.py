"""Element-matrix kernels in vectorized numpy (fallback for ``_kernels.pyx``).

All kernels take vertex coordinates ``x`` (N, 2), triangles ``tri`` (M, 3)
and, where needed, a quadrature rule (weights ``qw`` summing to 1/2) with
reference P2 gradients ``dphi2`` (nq, 6, 2) and P1 values ``phi1`` (nq, 3).
Vector P2 local dofs are interleaved: column ``2*i + c`` is component ``c``
of scalar basis function ``i``.
"""
import numpy as np


def _geometry(x, tri):
    p0 = x[tri[:, 0]]
    J = np.stack([x[tri[:, 1]] - p0, x[tri[:, 2]] - p0], axis=2)  # J[:, :, k] = column k
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invT = np.empty_like(J)  # inverse transpose
    invT[:, 0, 0] = J[:, 1, 1] / det
    invT[:, 0, 1] = -J[:, 1, 0] / det
    invT[:, 1, 0] = -J[:, 0, 1] / det
    invT[:, 1, 1] = J[:, 0, 0] / det
    return invT, det


def p2_stiffness(x, tri, qw, dphi2):
    """(M, 6, 6) local matrices of int grad(phi_i) . grad(phi_j)."""
    invT, det = _geometry(x, tri)
    g = np.einsum("mab,qib->mqia", invT, dphi2)
    return np.einsum("q,m,mqia,mqja->mij", qw, det, g, g)


def p2p1_divergence(x, tri, qw, dphi2, phi1):
    """(M, 3, 12) local matrices of int psi_k d(phi_i)/dx_c, column 2*i + c."""
    invT, det = _geometry(x, tri)
    g = np.einsum("mab,qib->mqia", invT, dphi2)
    out = np.einsum("q,m,qk,mqia->mkia", qw, det, phi1, g)
    return out.reshape(len(tri), 3, 12)


def p1_mass(x, tri):
    _, det = _geometry(x, tri)
    base = (np.ones((3, 3)) + np.eye(3)) / 24.0
    return det[:, None, None] * base


def p1_stiffness(x, tri):
    invT, det = _geometry(x, tri)
    dref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    g = np.einsum("mab,ib->mia", invT, dref)
    return 0.5 * det[:, None, None] * np.einsum("mia,mja->mij", g, g)
