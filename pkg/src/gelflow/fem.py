"""Lagrange P1 / vector-P2 spaces, quadrature and assembly.

Conventions
-----------
* Reference triangle ``{(s, t): s, t >= 0, s + t <= 1}``, barycentric
  coordinates ``(1 - s - t, s, t)``.
* P2 local order: three vertex functions ``l_i (2 l_i - 1)`` followed by the
  edge functions ``4 l0 l1``, ``4 l1 l2``, ``4 l2 l0``.
* Scalar P2 global dofs: vertices first, then edges in ``mesh.edges`` order.
* Vector P2 dofs are interleaved, ``2 * s + c`` for scalar dof ``s`` and
  component ``c``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import kernels
from .mesh import Mesh

# -- quadrature -------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,), sum 1/2
    degree: int


def triangle_rule(degree: int = 4) -> QuadratureRule:
    """Symmetric triangle rules: 1-point (degree 1), 3-point (2) and 6-point (4)."""
    if degree <= 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5]), 1)
    if degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        return QuadratureRule(pts, np.full(3, 1 / 6), 2)
    if degree <= 4:
        a, wa = 0.445948490915964886318329253883, 0.223381589678011465944827196297
        b, wb = 0.091576213509770743459571463402, 0.109951743655321867374506136630
        pts = np.array([
            [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
            [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
        ])
        return QuadratureRule(pts, 0.5 * np.array([wa] * 3 + [wb] * 3), 4)
    raise ValueError(f"no rule of degree {degree}")


def edge_rule():
    """3-point Gauss-Legendre on [0, 1]: (points, weights summing to 1)."""
    s, w = np.polynomial.legendre.leggauss(3)
    return 0.5 * (s + 1.0), 0.5 * w


QUAD = triangle_rule(4)

# -- basis ------------------------------------------------------------------------

_DLAM = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGES = ((0, 1), (1, 2), (2, 0))


def eval_basis(kind: str, bary):
    """Basis values and reference gradients at barycentric points.

    Returns ``(values, grads)`` with shapes (n, k) and (n, k, 2), k = 3 for
    ``"p1"`` and 6 for ``"p2"``; a single point gives n = 1.
    """
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    n = len(lam)
    if kind == "p1":
        return lam.copy(), np.broadcast_to(_DLAM, (n, 3, 2)).copy()
    if kind != "p2":
        raise ValueError(f"unknown element kind {kind!r}")
    vals = np.empty((n, 6))
    grads = np.empty((n, 6, 2))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2 * lam[:, i] - 1)
        grads[:, i] = (4 * lam[:, i] - 1)[:, None] * _DLAM[i]
    for k, (i, j) in enumerate(_EDGES):
        vals[:, 3 + k] = 4 * lam[:, i] * lam[:, j]
        grads[:, 3 + k] = 4 * (lam[:, j][:, None] * _DLAM[i] + lam[:, i][:, None] * _DLAM[j])
    return vals, grads


@lru_cache(maxsize=None)
def _tables(degree=4):
    rule = triangle_rule(degree)
    phi1, _ = eval_basis("p1", rule.points)
    phi2, dphi2 = eval_basis("p2", rule.points)
    return rule, phi1, phi2, dphi2


# -- geometry helpers ---------------------------------------------------------------


_GEOMETRY = weakref.WeakKeyDictionary()


def affine_maps(mesh: Mesh):
    """Per-triangle ``(origin, J, invJT, det)`` of the reference map (cached per mesh)."""
    if mesh not in _GEOMETRY:
        maps = _affine_maps(mesh)
        for a in maps:
            a.flags.writeable = False
        _GEOMETRY[mesh] = maps
    return _GEOMETRY[mesh]


def _affine_maps(mesh: Mesh):
    x, t = mesh.vertices, mesh.triangles
    p0 = x[t[:, 0]]
    J = np.stack([x[t[:, 1]] - p0, x[t[:, 2]] - p0], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJT = np.linalg.inv(J).transpose(0, 2, 1)
    return p0, J, invJT, det


def quadrature_points(mesh: Mesh, rule: QuadratureRule = QUAD):
    """Physical points (M, nq, 2) and weights (M, nq) including the Jacobian."""
    x = mesh.vertices[mesh.triangles]  # (M, 3, 2)
    pts = np.matmul(rule.points, x)
    w = 2.0 * mesh.areas[:, None] * rule.weights[None, :]
    return pts, w


def to_barycentric(mesh: Mesh, x, elem):
    p0, _, invJT, _ = affine_maps(mesh)
    st = np.einsum("mba,mb->ma", invJT[elem], np.asarray(x) - p0[elem])
    return np.column_stack([1 - st[:, 0] - st[:, 1], st[:, 0], st[:, 1]])


def boundary_quadrature(mesh: Mesh):
    """Gauss points on every boundary edge.

    Returns points (B, 3, 2), weights (B, 3) scaled by edge length, outward
    normals (B, 2), tags (B,), and the barycentric coordinates of the points
    in the parent triangle (B, 3, 3).
    """
    s, w = edge_rule()
    a = mesh.vertices[mesh.boundary_edges[:, 0]]
    b = mesh.vertices[mesh.boundary_edges[:, 1]]
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    weights = mesh.boundary_lengths[:, None] * w[None, :]
    tri = mesh.triangles[mesh.boundary_parents]
    ia = np.argmax(tri == mesh.boundary_edges[:, [0]], axis=1)
    ib = np.argmax(tri == mesh.boundary_edges[:, [1]], axis=1)
    bary = np.zeros((len(tri), 3, 3))
    rows = np.arange(len(tri))
    bary[rows, :, ia] = (1 - s)[None, :]
    bary[rows, :, ib] = s[None, :]
    return pts, weights, mesh.boundary_normals, mesh.boundary_tags, bary


def integrate_domain(mesh: Mesh, func, rule: QuadratureRule = QUAD) -> float:
    """``int_Omega func``; ``func(x, elem)`` receives flat (n, 2) points and element ids."""
    pts, w = quadrature_points(mesh, rule)
    elem = np.repeat(np.arange(mesh.n_triangles), pts.shape[1])
    vals = np.asarray(func(pts.reshape(-1, 2), elem), dtype=float).reshape(w.shape)
    return float(np.sum(vals * w))


def integrate_boundary(mesh: Mesh, func) -> float:
    """``oint func dS``; ``func(x, normal, tag)`` is vectorized over points."""
    pts, w, normals, tags, _ = boundary_quadrature(mesh)
    nq = pts.shape[1]
    vals = func(pts.reshape(-1, 2), np.repeat(normals, nq, axis=0), np.repeat(tags, nq))
    return float(np.sum(np.asarray(vals, dtype=float).reshape(w.shape) * w))


# -- dof maps ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DofMap:
    kind: str  # "p1" | "p2" | "vp2"
    mesh: Mesh
    n_dofs: int
    cell_dofs: np.ndarray  # (M, k)

    @classmethod
    def p1(cls, mesh: Mesh) -> "DofMap":
        return cls("p1", mesh, mesh.n_vertices, mesh.triangles.copy())

    @classmethod
    def p2(cls, mesh: Mesh) -> "DofMap":
        cd = np.hstack([mesh.triangles, mesh.tri_edges + mesh.n_vertices])
        return cls("p2", mesh, mesh.n_vertices + mesh.n_edges, cd)

    @classmethod
    def vector_p2(cls, mesh: Mesh) -> "DofMap":
        s = cls.p2(mesh)
        cd = np.stack([2 * s.cell_dofs, 2 * s.cell_dofs + 1], axis=2).reshape(len(s.cell_dofs), 12)
        return cls("vp2", mesh, 2 * s.n_dofs, cd)

    @property
    def scalar_kind(self):
        return "p2" if self.kind in ("p2", "vp2") else "p1"

    def node_coordinates(self) -> np.ndarray:
        """Coordinates of the scalar nodes (vertices, then edge midpoints for P2)."""
        m = self.mesh
        if self.scalar_kind == "p1":
            return m.vertices
        mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
        return np.vstack([m.vertices, mids])

    def boundary_dofs(self, tag=None) -> np.ndarray:
        """Scalar (or interleaved vector) dofs on boundary edges, optionally one tag."""
        m = self.mesh
        sel = np.ones(len(m.boundary_edges), bool) if tag is None else m.boundary_tags == tag
        nodes = list(np.unique(m.boundary_edges[sel]))
        if self.scalar_kind == "p2":
            nodes = np.concatenate([nodes, m.n_vertices + m.boundary_edge_ids[sel]])
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        if self.kind == "vp2":
            return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))
        return nodes


@dataclass
class FEField:
    dofmap: DofMap
    coef: np.ndarray

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        if self.coef.shape != (self.dofmap.n_dofs,):
            raise ValueError(f"coefficient length {self.coef.shape} != dof count {self.dofmap.n_dofs}")


def interpolate_scalar(space: DofMap, func) -> np.ndarray:
    return np.asarray(func(space.node_coordinates()), dtype=float).reshape(-1)


def interpolate_vector(space: DofMap, func) -> np.ndarray:
    vals = np.asarray(func(space.node_coordinates()), dtype=float).reshape(-1, 2)
    return vals.reshape(-1)


def vertex_values(space: DofMap, coef) -> np.ndarray:
    """Nodal values at mesh vertices; (N,) for scalars, (N, 2) for vector P2."""
    n = space.mesh.n_vertices
    if space.kind == "vp2":
        return np.asarray(coef).reshape(-1, 2)[:n]
    return np.asarray(coef)[:n]


# -- evaluation at quadrature points ---------------------------------------------------


def scalar_at_quadrature(space: DofMap, coef, rule=QUAD):
    """Values (M, nq) and physical gradients (M, nq, 2) of a scalar field."""
    kind = space.scalar_kind
    vals, dref = eval_basis(kind, rule.points)
    _, _, invJT, _ = affine_maps(space.mesh)
    c = np.asarray(coef)[space.cell_dofs]  # (M, k)
    v = c @ vals.T
    gref = np.einsum("mk,qkb->mqb", c, dref)
    g = np.einsum("mqb,mab->mqa", gref, invJT)
    return v, g


def vector_at_quadrature(space: DofMap, coef, rule=QUAD):
    """Values (M, nq, 2) and gradients (M, nq, 2, 2) with ``G[..., c, a] = du_c/dx_a``."""
    vals, dref = eval_basis("p2", rule.points)
    _, _, invJT, _ = affine_maps(space.mesh)
    c = np.asarray(coef)[space.cell_dofs].reshape(-1, 6, 2)
    v = np.einsum("mkc,qk->mqc", c, vals)
    gref = np.einsum("mkc,qkb->mqcb", c, dref)
    g = np.einsum("mqcb,mab->mqca", gref, invJT)
    return v, g


def eval_divergence(space: DofMap, coef, x, elem):
    """Pointwise divergence of a vector-P2 field at points ``x`` inside elements ``elem``."""
    bary = to_barycentric(space.mesh, x, elem)
    _, dref = eval_basis("p2", bary)  # (n, 6, 2)
    _, _, invJT, _ = affine_maps(space.mesh)
    c = np.asarray(coef)[space.cell_dofs[elem]].reshape(-1, 6, 2)
    grad = np.einsum("nkc,nkb,nab->nca", c, dref, invJT[elem])
    return grad[:, 0, 0] + grad[:, 1, 1]


# -- assembly -------------------------------------------------------------------------


def _scatter(local, rows, cols, shape) -> sp.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    A = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def local_vector_laplacian(mesh: Mesh) -> np.ndarray:
    rule, _, _, dphi2 = _tables()
    K6 = kernels.p2_stiffness(mesh.vertices, mesh.triangles, rule.weights, dphi2)
    return np.einsum("mij,cd->micjd", K6, np.eye(2)).reshape(len(K6), 12, 12)


def assemble_vector_laplacian(mesh: Mesh, vdm: DofMap, beta: float = 1.0) -> sp.csr_matrix:
    """``beta * int grad(phi_i) : grad(phi_j)`` on vector P2."""
    local = beta * local_vector_laplacian(mesh)
    return _scatter(local, vdm.cell_dofs, vdm.cell_dofs, (vdm.n_dofs, vdm.n_dofs))


def assemble_divergence(mesh: Mesh, vdm: DofMap, pdm: DofMap) -> sp.csr_matrix:
    """``B[k, i] = int psi_k div(phi_i)`` (P1 rows, vector-P2 columns)."""
    rule, phi1, _, dphi2 = _tables()
    local = kernels.p2p1_divergence(mesh.vertices, mesh.triangles, rule.weights, dphi2, phi1)
    return _scatter(local, pdm.cell_dofs, vdm.cell_dofs, (pdm.n_dofs, vdm.n_dofs))


def assemble_mass_p1(mesh: Mesh) -> sp.csr_matrix:
    local = kernels.p1_mass(mesh.vertices, mesh.triangles)
    return _scatter(local, mesh.triangles, mesh.triangles, (mesh.n_vertices,) * 2)


def assemble_stiffness_p1(mesh: Mesh) -> sp.csr_matrix:
    local = kernels.p1_stiffness(mesh.vertices, mesh.triangles)
    return _scatter(local, mesh.triangles, mesh.triangles, (mesh.n_vertices,) * 2)


def assemble_boundary_load(mesh: Mesh, vdm: DofMap, f) -> np.ndarray:
    """``F[i] = oint f . phi_i dS`` with 3 Gauss points per boundary edge.

    ``f(x, normal, tag)`` returns (n, 2) force vectors.
    """
    pts, w, normals, tags, bary = boundary_quadrature(mesh)
    B, nq = w.shape
    fv = np.asarray(f(pts.reshape(-1, 2), np.repeat(normals, nq, axis=0), np.repeat(tags, nq)),
                    dtype=float).reshape(B, nq, 2)
    phi, _ = eval_basis("p2", bary.reshape(-1, 3))
    phi = phi.reshape(B, nq, 6)
    local = np.einsum("bq,bqc,bqk->bkc", w, fv, phi).reshape(B, 12)
    F = np.zeros(vdm.n_dofs)
    np.add.at(F, vdm.cell_dofs[mesh.boundary_parents].ravel(), local.ravel())
    return F


def assemble_boundary_scalar_load(mesh: Mesh, pdm: DofMap, g) -> np.ndarray:
    """``oint g psi_k dS`` for P1 test functions; ``g(x, normal, tag)`` is scalar."""
    pts, w, normals, tags, bary = boundary_quadrature(mesh)
    B, nq = w.shape
    gv = np.asarray(g(pts.reshape(-1, 2), np.repeat(normals, nq, axis=0), np.repeat(tags, nq)),
                    dtype=float).reshape(B, nq)
    local = np.einsum("bq,bq,bqk->bk", w, gv, bary)
    F = np.zeros(pdm.n_dofs)
    np.add.at(F, mesh.triangles[mesh.boundary_parents].ravel(), local.ravel())
    return F


def assemble_volume_load(space: DofMap, g) -> np.ndarray:
    """``int g . phi_i`` (vector P2, ``g`` -> (n, 2)) or ``int g psi_k`` (scalar)."""
    pts, _ = quadrature_points(space.mesh)
    return assemble_quadrature_values(space, np.asarray(g(pts.reshape(-1, 2)), dtype=float))


def assemble_quadrature_values(space: DofMap, gv) -> np.ndarray:
    """Load vector from source values already sampled at the quadrature points."""
    mesh = space.mesh
    rule, phi1, phi2, _ = _tables()
    _, w = quadrature_points(mesh, rule)
    M, nq = w.shape
    gv = np.asarray(gv, dtype=float)
    if space.kind == "vp2":
        gv = gv.reshape(M, nq, 2)
        local = np.einsum("mqc,qk->mkc", w[:, :, None] * gv, phi2).reshape(M, 12)
    else:
        phi = phi1 if space.kind == "p1" else phi2
        local = (w * gv.reshape(M, nq)) @ phi
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)


@dataclass(frozen=True)
class MomentRows:
    mean_u_x: np.ndarray
    mean_u_y: np.ndarray
    flux_u: np.ndarray
    mean_ptilde: np.ndarray


def assemble_moment_rows(mesh: Mesh, vdm: DofMap, pdm: DofMap) -> MomentRows:
    """Linear functionals ``int u_x``, ``int u_y``, ``oint u . n`` and ``int p``."""
    one_x = assemble_volume_load(vdm, lambda x: np.tile([1.0, 0.0], (len(x), 1)))
    one_y = assemble_volume_load(vdm, lambda x: np.tile([0.0, 1.0], (len(x), 1)))
    flux = assemble_boundary_load(mesh, vdm, lambda x, n, tag: n)
    mean_p = assemble_volume_load(pdm, lambda x: np.ones(len(x)))
    return MomentRows(one_x, one_y, flux, mean_p)


def integrate_functionals(mesh: Mesh, u=None, q=None, ptilde=None, f=None) -> dict:
    """Integral diagnostics of discrete fields, by exact quadrature.

    Any of ``u`` (vector P2 FEField), ``q``, ``ptilde`` (P1 FEFields) and the
    boundary load ``f`` may be omitted; only the computable entries are returned
    (``int_q``, ``int_ptilde``, ``flux_u``, ``f_dot_u``, ``f_moment``).
    """
    out = {}
    for name, fld in (("int_q", q), ("int_ptilde", ptilde)):
        if fld is not None:
            if fld.dofmap.mesh is not mesh:
                raise ValueError(f"{name}: field lives on a different mesh")
            v, _ = scalar_at_quadrature(fld.dofmap, fld.coef)
            _, w = quadrature_points(mesh)
            out[name] = float(np.sum(v * w))
    if u is not None:
        if u.dofmap.mesh is not mesh or u.dofmap.kind != "vp2":
            raise ValueError("u must be a vector-P2 field on this mesh")
        pts, w, normals, tags, bary = boundary_quadrature(mesh)
        B, nq = w.shape
        phi, _ = eval_basis("p2", bary.reshape(-1, 3))
        c = u.coef[u.dofmap.cell_dofs[mesh.boundary_parents]].reshape(B, 6, 2)
        uv = np.einsum("bkc,bqk->bqc", c, phi.reshape(B, nq, 6))
        out["flux_u"] = float(np.sum(w * np.einsum("bqc,bc->bq", uv, normals)))
        if f is not None:
            fv = f(pts.reshape(-1, 2), np.repeat(normals, nq, axis=0), np.repeat(tags, nq)).reshape(B, nq, 2)
            out["f_dot_u"] = float(np.sum(w * np.sum(fv * uv, axis=2)))
    if f is not None:
        out["f_moment"] = integrate_boundary(mesh, lambda x, n, tag: np.sum(f(x, n, tag) * x, axis=1))
    return out


def assemble_gradient_load(vdm: DofMap, grad) -> np.ndarray:
    """``int grad(w) : grad(phi_i)`` for a field given by its gradient callback
    ``grad(x)[:, c, a] = dw_c/dx_a`` (right-hand side of the Ritz projection)."""
    mesh = vdm.mesh
    rule, _, _, dphi2 = _tables()
    pts, w = quadrature_points(mesh, rule)
    M, nq = w.shape
    G = np.asarray(grad(pts.reshape(-1, 2)), dtype=float).reshape(M, nq, 2, 2)
    _, _, invJT, _ = affine_maps(mesh)
    gphi = np.einsum("mab,qkb->mqka", invJT, dphi2)
    local = np.einsum("mq,mqca,mqka->mkc", w, G, gphi).reshape(M, 12)
    out = np.zeros(vdm.n_dofs)
    np.add.at(out, vdm.cell_dofs.ravel(), local.ravel())
    return out
