"""Legacy VTK 2.0 ASCII snapshots on linear triangles."""
from __future__ import annotations

import numpy as np

from .mesh import Mesh
from .scheme import State


def _fmt(a) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(a))


def write_snapshot(state: State, mesh: Mesh, magnification: float = 500.0, title: str = "gelflow") -> str:
    """VTK text for one state.

    The vector-P2 displacement is restricted to mesh vertices. ``warp`` is
    ``magnification`` times the displacement. The pressure array is omitted
    when the state has none (the first state of Algorithm 1).
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    disp = np.asarray(state.u, dtype=float).reshape(-1, 2)[:nv]
    disp3 = np.column_stack([disp, np.zeros(nv)])
    pts = np.column_stack([mesh.vertices, np.zeros(nv)])
    cells = np.column_stack([np.full(nt, 3), mesh.triangles])
    out = [
        "# vtk DataFile Version 2.0",
        f"{title} step {state.n} t={float(state.t)!r}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
        _fmt(pts),
        f"CELLS {nt} {4 * nt}",
        "\n".join(" ".join(str(int(v)) for v in row) for row in cells),
        f"CELL_TYPES {nt}",
        "\n".join(["5"] * nt),
        f"POINT_DATA {nv}",
    ]
    if state.p is not None:
        out += ["SCALARS pressure double 1", "LOOKUP_TABLE default", _fmt(np.asarray(state.p)[:, None])]
    out += ["SCALARS q double 1", "LOOKUP_TABLE default", _fmt(np.asarray(state.q)[:, None])]
    out += ["VECTORS displacement double", _fmt(disp3)]
    out += ["VECTORS warp double", _fmt(magnification * disp3)]
    return "\n".join(out) + "\n"


def read_point_data(text: str) -> dict:
    """Parse POINTS and POINT_DATA arrays back from :func:`write_snapshot` output."""
    lines = text.splitlines()
    data, i = {}, 0
    nv = None
    while i < len(lines):
        tok = lines[i].split()
        if tok and tok[0] == "POINTS":
            nv = int(tok[1])
            data["POINTS"] = np.loadtxt(lines[i + 1:i + 1 + nv], ndmin=2)
            i += 1 + nv
        elif tok and tok[0] == "SCALARS":
            data[tok[1]] = np.loadtxt(lines[i + 2:i + 2 + nv], ndmin=1)
            i += 2 + nv
        elif tok and tok[0] == "VECTORS":
            data[tok[1]] = np.loadtxt(lines[i + 1:i + 1 + nv], ndmin=2)
            i += 1 + nv
        else:
            i += 1
    return data
