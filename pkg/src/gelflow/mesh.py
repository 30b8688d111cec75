"""Conforming triangulations of planar domains.

Boundary edges are stored oriented with the domain on their left, so the
outward unit normal of edge ``(a, b)`` is the tangent ``x_b - x_a`` rotated
clockwise by 90 degrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidParameterError, MeshParseError, MeshValidationError

# Tags used by gen_rect_mesh.
LEFT, RIGHT, BOTTOM, TOP = 1, 2, 3, 4


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    vertices : (N, 2) float array
    triangles : (M, 3) int array, counter-clockwise
    boundary_edges : (B, 2) int array, domain on the left
    boundary_normals : (B, 2) float array, outward unit normals
    boundary_tags : (B,) int array
    boundary_parents : (B,) int array, index of the owning triangle
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_normals: np.ndarray
    boundary_tags: np.ndarray
    boundary_parents: np.ndarray
    _edge_data: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_normals",
                     "boundary_tags", "boundary_parents"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        object.__setattr__(self, "_edge_data", _edge_topology(self.triangles))

    @classmethod
    def build(cls, vertices, triangles, boundary_edges, boundary_tags) -> "Mesh":
        """Validate raw connectivity and derive normals and parent triangles.

        Boundary edges may be given in either orientation; they are flipped
        to agree with their parent triangle.
        """
        x = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 2)
        tri = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        be = np.array(boundary_edges, dtype=np.int64).reshape(-1, 2)
        tags = np.array(boundary_tags, dtype=np.int64).reshape(-1)
        nv = len(x)
        if len(tags) != len(be):
            raise MeshValidationError("one tag per boundary edge", f"{len(be)} edges, {len(tags)} tags")
        if tri.size and (tri.min() < 0 or tri.max() >= nv):
            raise MeshValidationError("vertex index out of range", "triangle references missing vertex")
        if be.size and (be.min() < 0 or be.max() >= nv):
            raise MeshValidationError("vertex index out of range", "boundary edge references missing vertex")
        if len(tri) == 0:
            raise MeshValidationError("empty mesh")

        area = signed_areas(x, tri)
        bad = np.flatnonzero(area <= 0.0)
        if bad.size:
            raise MeshValidationError("negative area", f"triangle {bad[0]} has signed area {area[bad[0]]:.3e}")

        edges, tri_edges, counts = _edge_topology(tri)
        if np.any(counts > 2):
            raise MeshValidationError("conformity", "an edge is shared by more than two triangles")

        deg = np.bincount(be.ravel(), minlength=nv)
        if np.any((deg != 0) & (deg != 2)):
            v = int(np.flatnonzero((deg != 0) & (deg != 2))[0])
            raise MeshValidationError("boundary not closed", f"vertex {v} touches {deg[v]} boundary edges")

        key = {tuple(e): i for i, e in enumerate(edges)}
        topo_boundary = set(np.flatnonzero(counts == 1).tolist())
        listed = []
        for a, b in be:
            k = key.get((min(a, b), max(a, b)))
            if k is None or counts[k] != 1:
                raise MeshValidationError("boundary edge not on boundary", f"edge ({a}, {b})")
            listed.append(k)
        if len(set(listed)) != len(listed) or set(listed) != topo_boundary:
            raise MeshValidationError("boundary mismatch", "listed boundary edges differ from the topological boundary")

        # Owner triangle and orientation from the triangle's CCW order.
        owner = np.full(len(edges), -1, dtype=np.int64)
        local = np.full(len(edges), -1, dtype=np.int64)
        for j in range(3):
            owner[tri_edges[:, j]] = np.arange(len(tri))
            local[tri_edges[:, j]] = j
        listed = np.asarray(listed, dtype=np.int64)
        parents = owner[listed]
        lj = local[listed]
        a = tri[parents, lj]
        b = tri[parents, (lj + 1) % 3]
        oriented = np.column_stack([a, b])
        d = x[b] - x[a]
        length = np.hypot(d[:, 0], d[:, 1])
        normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
        mesh = cls(x, tri, oriented, normals, tags, parents)
        mesh.check_normals()
        return mesh

    def check_normals(self):
        c = self.vertices[self.triangles[self.boundary_parents]].mean(axis=1)
        mid = self.vertices[self.boundary_edges].mean(axis=1)
        if np.any(np.sum(self.boundary_normals * (mid - c), axis=1) <= 0):
            raise MeshValidationError("outward normals")

    # -- topology -------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) unique edges with sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """(M, 3) edge index of local edges (0,1), (1,2), (2,0)."""
        return self._edge_data[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def boundary_edge_ids(self) -> np.ndarray:
        """Index into :attr:`edges` of every boundary edge."""
        key = {tuple(e): i for i, e in enumerate(self.edges)}
        return np.array([key[(min(a, b), max(a, b))] for a, b in self.boundary_edges], dtype=np.int64)

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    def boundary_loops(self) -> list[list[int]]:
        """Boundary vertex cycles, each traversed with the domain on the left."""
        nxt = {int(a): int(b) for a, b in self.boundary_edges}
        seen, loops = set(), []
        for start in nxt:
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    def same_as(self, other: "Mesh", tol=0.0) -> bool:
        """Structural equality (identical ordering)."""
        return (
            self.vertices.shape == other.vertices.shape
            and np.allclose(self.vertices, other.vertices, rtol=0, atol=tol)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_tags, other.boundary_tags)
        )


def signed_areas(x, tri) -> np.ndarray:
    p0, p1, p2 = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _edge_topology(tri):
    local = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    local.sort(axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    tri_edges = inverse.reshape(-1).reshape(3, -1).T.copy()
    return edges, tri_edges, counts


# -- generators ---------------------------------------------------------------

def gen_rect_mesh(nx: int, ny: int, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> Mesh:
    """Structured ``nx`` by ``ny`` grid, every cell cut along its
    lower-left to upper-right diagonal. Tags: 1 left, 2 right, 3 bottom, 4 top."""
    if nx < 1 or ny < 1:
        raise InvalidParameterError(f"nx, ny must be >= 1, got {nx}, {ny}")
    (x0, y0), (x1, y1) = lower, upper
    if not (x1 > x0 and y1 > y0):
        raise InvalidParameterError(f"degenerate rectangle {lower} -> {upper}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    tris = np.empty((2 * len(i), 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])

    ii, jj = np.arange(nx), np.arange(ny)
    bottom = np.column_stack([vid(ii, 0), vid(ii + 1, 0)])
    right = np.column_stack([vid(nx, jj), vid(nx, jj + 1)])
    top = np.column_stack([vid(ii + 1, ny), vid(ii, ny)])
    left = np.column_stack([vid(0, jj + 1), vid(0, jj)])
    be = np.concatenate([bottom, right, top, left])
    tags = np.concatenate([np.full(nx, BOTTOM), np.full(ny, RIGHT), np.full(nx, TOP), np.full(ny, LEFT)])
    return Mesh.build(verts, tris, be, tags)


def _ring_count(n_theta, k, n_r):
    if n_theta % 4 == 0:
        return max(4, 4 * int(round(n_theta * k / (4.0 * n_r))))
    return max(3, int(round(n_theta * k / n_r)))


def gen_ellipse_mesh(a: float, b: float, n_r: int, n_theta: int) -> Mesh:
    """Polar-structured mesh of the polygon inscribed in ``x^2/a^2 + y^2/b^2 <= 1``.

    Ring ``k`` (radius fraction ``k/n_r``) carries roughly ``n_theta k / n_r``
    nodes so element shapes stay even; the outer ring has exactly ``n_theta``.
    Boundary tags 1..4 are the angular quadrants of the edge midpoints.
    """
    if not (a > 0 and b > 0):
        raise InvalidParameterError(f"semi-axes must be positive, got {a}, {b}")
    if n_r < 1 or n_theta < 3:
        raise InvalidParameterError(f"need n_r >= 1 and n_theta >= 3, got {n_r}, {n_theta}")

    verts = [(0.0, 0.0)]
    rings = []
    for k in range(1, n_r + 1):
        n = n_theta if k == n_r else _ring_count(n_theta, k, n_r)
        th = 2.0 * np.pi * np.arange(n) / n
        r = k / n_r
        start = len(verts)
        verts.extend(zip(a * r * np.cos(th), b * r * np.sin(th)))
        rings.append((start, th))

    tris = []
    s, th = rings[0]
    n = len(th)
    tris += [(0, s + j, s + (j + 1) % n) for j in range(n)]
    for (si, ti), (so, to) in zip(rings[:-1], rings[1:]):
        ni, no = len(ti), len(to)
        ai = np.append(ti, 2 * np.pi)
        ao = np.append(to, 2 * np.pi)
        i = j = 0
        while i < ni or j < no:
            if j == no or (i < ni and ai[i + 1] < ao[j + 1] - 1e-12):
                tris.append((si + i % ni, so + j % no, si + (i + 1) % ni))
                i += 1
            else:
                tris.append((si + i % ni, so + j % no, so + (j + 1) % no))
                j += 1

    so, to = rings[-1]
    no = len(to)
    be = np.column_stack([so + np.arange(no), so + (np.arange(no) + 1) % no])
    mid_angle = np.mod(to + np.pi / no, 2 * np.pi)
    tags = 1 + np.minimum((mid_angle // (np.pi / 2)).astype(np.int64), 3)
    return Mesh.build(np.array(verts), np.array(tris), be, tags)


def refine_uniform(m: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    New vertices are appended in edge order; boundary children inherit tags.
    """
    nv = m.n_vertices
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    verts = np.vstack([m.vertices, mids])
    t = m.triangles
    e = m.tri_edges + nv  # midpoint of (0,1), (1,2), (2,0)
    m01, m12, m20 = e[:, 0], e[:, 1], e[:, 2]
    children = np.stack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    bm = m.boundary_edge_ids + nv
    a, b = m.boundary_edges[:, 0], m.boundary_edges[:, 1]
    be = np.stack([np.column_stack([a, bm]), np.column_stack([bm, b])], axis=1).reshape(-1, 2)
    tags = np.repeat(m.boundary_tags, 2)
    return Mesh.build(verts, children, be, tags)


def mesh_size(m: Mesh) -> float:
    """Largest edge length."""
    d = m.vertices[m.edges[:, 1]] - m.vertices[m.edges[:, 0]]
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def mesh_stats(m: Mesh) -> dict:
    x, t = m.vertices, m.triangles
    angles = []
    for k in range(3):
        u = x[t[:, (k + 1) % 3]] - x[t[:, k]]
        v = x[t[:, (k + 2) % 3]] - x[t[:, k]]
        cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    tags, counts = np.unique(m.boundary_tags, return_counts=True)
    return {
        "vertices": m.n_vertices,
        "triangles": m.n_triangles,
        "edges": m.n_edges,
        "boundary_edges": len(m.boundary_edges),
        "boundary_loops": len(m.boundary_loops()),
        "euler_characteristic": m.euler_characteristic(),
        "h": mesh_size(m),
        "area": m.area,
        "min_angle_deg": float(np.min(angles)),
        "tags": {int(k): int(c) for k, c in zip(tags, counts)},
    }


# -- text format ----------------------------------------------------------------

def write_mesh(m: Mesh) -> str:
    out = ["$Nodes", str(m.n_vertices)]
    out += [f"{i + 1} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(m.vertices)]
    out += ["$Triangles", str(m.n_triangles)]
    out += [f"{i + 1} {a + 1} {b + 1} {c + 1}" for i, (a, b, c) in enumerate(m.triangles)]
    out += ["$BoundaryEdges", str(len(m.boundary_edges))]
    out += [f"{i + 1} {a + 1} {b + 1} {tag}"
            for i, ((a, b), tag) in enumerate(zip(m.boundary_edges, m.boundary_tags))]
    return "\n".join(out) + "\n"


def read_mesh(text: str) -> Mesh:
    """Parse the ``$Nodes`` / ``$Triangles`` / ``$BoundaryEdges`` format and validate."""
    lines = [(n + 1, ln.strip()) for n, ln in enumerate(text.splitlines())]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    pos = 0

    def take_section(header, ncols, conv):
        nonlocal pos
        if pos >= len(lines):
            raise MeshParseError(f"missing section {header}", lines[-1][0] if lines else 1)
        lineno, ln = lines[pos]
        if ln != header:
            raise MeshParseError(f"expected {header}, found {ln!r}", lineno)
        pos += 1
        if pos >= len(lines):
            raise MeshParseError(f"missing count after {header}", lineno)
        lineno, ln = lines[pos]
        try:
            count = int(ln)
        except ValueError:
            raise MeshParseError(f"bad count {ln!r}", lineno) from None
        if count < 0:
            raise MeshParseError("negative count", lineno)
        pos += 1
        rows = []
        for k in range(count):
            if pos >= len(lines):
                raise MeshParseError(f"{header}: expected {count} records, got {k}", lines[-1][0])
            lineno, ln = lines[pos]
            parts = ln.split()
            if len(parts) != ncols + 1:
                raise MeshParseError(f"expected {ncols + 1} fields, got {len(parts)}", lineno)
            try:
                ident = int(parts[0])
                vals = [conv(p) for p in parts[1:]]
            except ValueError:
                raise MeshParseError(f"cannot parse {ln!r}", lineno) from None
            if ident != k + 1:
                raise MeshParseError(f"expected id {k + 1}, got {ident}", lineno)
            rows.append(vals)
            pos += 1
        return rows

    nodes = take_section("$Nodes", 2, float)
    tris = take_section("$Triangles", 3, int)
    bedges = take_section("$BoundaryEdges", 3, int)
    if pos != len(lines):
        raise MeshParseError("trailing content", lines[pos][0])
    tri = np.array(tris, dtype=np.int64).reshape(-1, 3) - 1
    be = np.array(bedges, dtype=np.int64).reshape(-1, 3)
    return Mesh.build(np.array(nodes, dtype=float).reshape(-1, 2), tri, be[:, :2] - 1, be[:, 2])
