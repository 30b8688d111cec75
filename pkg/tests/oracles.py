"""Brute-force reference implementations used only by the tests.

Nothing here shares code with the package's assembly path: basis functions
are evaluated from physical coordinates via barycentric solves, quadrature is
a collapsed (Duffy) Gauss-Legendre product rule, and every matrix is
accumulated entry by entry into a dense array.
"""
import numpy as np


def duffy_rule(n=6):
    """Product Gauss rule on the triangle with vertices (0,0), (1,0), (0,1).
    Exact for polynomials of degree <= 2n - 2."""
    s, w = np.polynomial.legendre.leggauss(n)
    s, w = 0.5 * (s + 1), 0.5 * w
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            u, v = s[i], s[j]
            pts.append((u, v * (1 - u)))
            wts.append(w[i] * w[j] * (1 - u))
    return np.array(pts), np.array(wts)


def triangle_points(P, n=6):
    """Physical quadrature points and weights on triangle P (3, 2)."""
    ref, w = duffy_rule(n)
    J = np.column_stack([P[1] - P[0], P[2] - P[0]])
    return P[0] + ref @ J.T, w * abs(np.linalg.det(J))


def barycentric(P, x):
    """Barycentric coordinates and their (constant) gradients on triangle P."""
    T = np.vstack([P.T, np.ones(3)])  # rows: x, y, 1
    Tinv = np.linalg.inv(T)
    lam = Tinv @ np.array([x[0], x[1], 1.0])
    dlam = Tinv[:, :2]  # d lambda_i / dx_a
    return lam, dlam


def p1_basis(P, x):
    lam, dlam = barycentric(P, x)
    return lam, dlam


def p2_basis(P, x):
    """Values (6,) and gradients (6, 2); order: vertices, then edges (0,1), (1,2), (2,0)."""
    lam, dlam = barycentric(P, x)
    vals = np.empty(6)
    grads = np.empty((6, 2))
    for i in range(3):
        vals[i] = lam[i] * (2 * lam[i] - 1)
        grads[i] = (4 * lam[i] - 1) * dlam[i]
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        vals[3 + k] = 4 * lam[i] * lam[j]
        grads[3 + k] = 4 * (lam[i] * dlam[j] + lam[j] * dlam[i])
    return vals, grads


def p2_dofs(mesh):
    """Global scalar P2 numbering per triangle: vertices, then n_vertices + edge id,
    with edge ids looked up in the sorted unique edge list."""
    edge_id = {tuple(e): k for k, e in enumerate(map(tuple, mesh.edges))}
    out = []
    for t in mesh.triangles:
        ids = [int(v) for v in t]
        for i, j in ((0, 1), (1, 2), (2, 0)):
            ids.append(mesh.n_vertices + edge_id[tuple(sorted((int(t[i]), int(t[j]))))])
        out.append(ids)
    return out


def brute_force_matrices(mesh):
    """Dense A (vector Laplacian, beta = 1), B (divergence), M (P1 mass), S (P1 stiffness)."""
    nv = mesh.n_vertices
    ns = nv + mesh.n_edges
    A = np.zeros((2 * ns, 2 * ns))
    B = np.zeros((nv, 2 * ns))
    M = np.zeros((nv, nv))
    S = np.zeros((nv, nv))
    dofs = p2_dofs(mesh)
    for e, t in enumerate(mesh.triangles):
        P = mesh.vertices[t]
        pts, wts = triangle_points(P)
        for x, w in zip(pts, wts):
            v2, g2 = p2_basis(P, x)
            v1, g1 = p1_basis(P, x)
            for a in range(6):
                for b in range(6):
                    val = w * g2[a] @ g2[b]
                    for c in range(2):
                        A[2 * dofs[e][a] + c, 2 * dofs[e][b] + c] += val
            for k in range(3):
                for a in range(6):
                    for c in range(2):
                        B[t[k], 2 * dofs[e][a] + c] += w * v1[k] * g2[a][c]
                for l in range(3):
                    M[t[k], t[l]] += w * v1[k] * v1[l]
                    S[t[k], t[l]] += w * g1[k] @ g1[l]
    return A, B, M, S


def brute_force_boundary_load(mesh, f, n_gauss=5):
    """Dense vector F_i = oint f . phi_i with a 5-point Gauss rule per edge."""
    nv = mesh.n_vertices
    ns = nv + mesh.n_edges
    F = np.zeros(2 * ns)
    dofs = p2_dofs(mesh)
    s, w = np.polynomial.legendre.leggauss(n_gauss)
    s, w = 0.5 * (s + 1), 0.5 * w
    for (i, j), nrm, tag, par in zip(mesh.boundary_edges, mesh.boundary_normals, mesh.boundary_tags,
                                     mesh.boundary_parents):
        P = mesh.vertices[mesh.triangles[par]]
        a, b = mesh.vertices[i], mesh.vertices[j]
        L = np.linalg.norm(b - a)
        for sk, wk in zip(s, w):
            x = a + sk * (b - a)
            fv = f(x[None], nrm[None], np.array([tag]))[0]
            v2, _ = p2_basis(P, x)
            for loc in range(6):
                for c in range(2):
                    F[2 * dofs[par][loc] + c] += wk * L * fv[c] * v2[loc]
    return F


def domain_integral(mesh, func, n=8):
    """High-order quadrature of a scalar function over the mesh."""
    total = 0.0
    for t in mesh.triangles:
        pts, w = triangle_points(mesh.vertices[t], n)
        total += np.sum(w * func(pts))
    return total
