"""Legacy ASCII VTK output of one level of a hierarchy."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Hierarchy

VTK_TETRA = 10


def write_vtk(h: Hierarchy, j: int, path, point_data: dict | None = None) -> Path:
    """Write ``T_j`` as an unstructured grid with cell data ``level`` and ``kind``.

    ``point_data`` maps names to arrays over all vertices of the level.
    """
    lvl = h.level(j)
    tv = h.tet_array(lvl.active_tets)
    pts = h.coords[: lvl.num_vertices]
    kinds = [int(h.tets[t].kind) for t in lvl.active_tets]
    lines = ["# vtk DataFile Version 3.0", f"level {j}", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in pts]
    lines.append(f"CELLS {len(tv)} {5 * len(tv)}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in tv]
    lines.append(f"CELL_TYPES {len(tv)}")
    lines += [str(VTK_TETRA)] * len(tv)
    lines += [f"CELL_DATA {len(tv)}", "SCALARS level int 1", "LOOKUP_TABLE default"]
    lines += [str(v) for v in h.tet_levels(lvl.active_tets)]
    lines += ["SCALARS kind int 1", "LOOKUP_TABLE default"]
    lines += [str(k) for k in kinds]
    if point_data:
        lines.append(f"POINT_DATA {len(pts)}")
        for name, vals in point_data.items():
            vals = np.asarray(vals, dtype=float)
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in vals]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_cells(path) -> tuple[np.ndarray, np.ndarray]:
    """Points and tet connectivity of a file written by :func:`write_vtk`."""
    tok = Path(path).read_text().split("\n")
    i = next(k for k, s in enumerate(tok) if s.startswith("POINTS"))
    n = int(tok[i].split()[1])
    pts = np.array([[float(x) for x in s.split()] for s in tok[i + 1:i + 1 + n]]).reshape(-1, 3)
    i = next(k for k, s in enumerate(tok) if s.startswith("CELLS"))
    m = int(tok[i].split()[1])
    cells = np.array([[int(x) for x in s.split()[1:]] for s in tok[i + 1:i + 1 + m]], dtype=np.int64)
    return pts, cells.reshape(-1, 4)
