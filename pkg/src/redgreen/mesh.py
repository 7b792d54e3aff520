"""Tetrahedral mesh hierarchy: vertices, tets, levels and adjacency queries.

A :class:`Hierarchy` owns an append-only vertex store and tet store.  Each
refinement level is described by a :class:`MeshLevel` listing the active
tets of ``T_j`` and the interior (degree-of-freedom) nodes of ``S_j``.
Midpoint vertices are keyed by the unordered id pair of their parent edge,
never by coordinates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

# local vertex pairs of the six tet edges, in canonical order
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


class MeshError(Exception):
    """Base class for mesh errors."""


class NonConformingInput(MeshError):
    pass


class DegenerateTet(MeshError):
    pass


class NotActive(MeshError):
    pass


class SelfQuery(MeshError):
    pass


class UnknownVertex(MeshError):
    pass


class LevelMissing(MeshError):
    pass


class TetKind(enum.IntEnum):
    ROOT = 0
    RED = 1
    GREEN = 2


class GreenType(enum.IntEnum):
    """Implemented irregular (green) closure patterns."""

    E1 = 1   # one marked edge
    E2F = 2  # two marked edges on a common face
    E2O = 3  # two opposite marked edges
    E3F = 4  # the three edges of one face


class Adjacency(enum.Enum):
    FACE = 3
    EDGE = 2
    VERTEX = 1
    DISJOINT = 0


@dataclass
class Tet:
    id: int
    verts: tuple[int, int, int, int]
    level: int
    kind: TetKind = TetKind.ROOT
    green_type: GreenType | None = None
    parent: int | None = None
    children: list[int] = field(default_factory=list)

    @property
    def is_green(self) -> bool:
        return self.kind == TetKind.GREEN

    def edges(self):
        v = self.verts
        return [edge_key(v[a], v[b]) for a, b in TET_EDGES]


@dataclass
class MeshLevel:
    """One triangulation ``T_j`` of the hierarchy."""

    level: int
    active_tets: np.ndarray
    interior_nodes: np.ndarray
    num_vertices: int
    region_tets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    refinement_region: frozenset = frozenset()

    @property
    def num_dofs(self) -> int:
        return len(self.interior_nodes)


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def signed_volume(p0, p1, p2, p3) -> float:
    return float(np.linalg.det(np.array([p1 - p0, p2 - p0, p3 - p0]))) / 6.0


def tet_volumes(coords: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volumes for an ``(n, 4)`` connectivity array."""
    p = coords[tets]
    e = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(e) / 6.0


def tet_diameters(coords: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = coords[tets]
    d = np.zeros(len(tets))
    for a, b in TET_EDGES:
        d = np.maximum(d, np.linalg.norm(p[:, a] - p[:, b], axis=1))
    return d


def _tri_areas(p, f):
    a, b, c = (p[:, i] for i in f)
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def shape_ratios(coords: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Inradius over diameter for each tet."""
    p = coords[tets]
    vol = np.abs(tet_volumes(coords, tets))
    area = sum(_tri_areas(p, f) for f in TET_FACES)
    return (3.0 * vol / area) / tet_diameters(coords, tets)


class Hierarchy:
    """Nested sequence of conforming tetrahedral triangulations."""

    def __init__(self):
        self._xyz = np.zeros((64, 3))
        self._n = 0
        self.birth_level: list[int] = []
        self.on_boundary: list[bool] = []
        self.tets: list[Tet] = []
        self.levels: list[MeshLevel] = []
        self.edge_midpoint_index: dict[tuple[int, int], int] = {}
        self.midpoint_parents: dict[int, tuple[int, int]] = {}
        self.domain_volume = 0.0
        self.boundary_area = 0.0
        self.name = "explicit"

    # ------------------------------------------------------------------
    # vertex store
    @property
    def coords(self) -> np.ndarray:
        return self._xyz[: self._n]

    @property
    def num_vertices(self) -> int:
        return self._n

    @property
    def J(self) -> int:
        return len(self.levels) - 1

    def add_vertex(self, xyz, level: int) -> int:
        if self._n == len(self._xyz):
            self._xyz = np.concatenate([self._xyz, np.zeros_like(self._xyz)])
        self._xyz[self._n] = np.asarray(xyz, dtype=float)
        self._n += 1
        self.birth_level.append(level)
        self.on_boundary.append(False)
        return self._n - 1

    def midpoint(self, a: int, b: int, level: int) -> int:
        """Return the midpoint vertex of edge (a, b), creating it on first use."""
        key = edge_key(a, b)
        vid = self.edge_midpoint_index.get(key)
        if vid is None:
            vid = self.add_vertex((self._xyz[a] + self._xyz[b]) / 2.0, level)
            self.edge_midpoint_index[key] = vid
            self.midpoint_parents[vid] = key
        return vid

    # ------------------------------------------------------------------
    # tet store
    def add_tet(self, verts, level, kind, parent=None, green_type=None) -> int:
        verts = self.canonical(verts)
        t = Tet(len(self.tets), verts, level, kind, green_type, parent)
        self.tets.append(t)
        if parent is not None:
            self.tets[parent].children.append(t.id)
        return t.id

    def canonical(self, verts) -> tuple[int, int, int, int]:
        """Sort ids ascending, then swap the last two if orientation is negative."""
        v = sorted(int(x) for x in verts)
        if len(set(v)) != 4:
            raise DegenerateTet(f"repeated vertex in {verts}")
        c = self.coords
        vol = signed_volume(c[v[0]], c[v[1]], c[v[2]], c[v[3]])
        if vol < 0:
            v[2], v[3] = v[3], v[2]
            vol = -vol
        if not vol > 0:
            raise DegenerateTet(f"tet {tuple(v)} has zero volume")
        return tuple(v)

    def tet_array(self, ids) -> np.ndarray:
        return np.array([self.tets[i].verts for i in ids], dtype=np.int64).reshape(-1, 4)

    def tet_levels(self, ids) -> np.ndarray:
        return np.array([self.tets[i].level for i in ids], dtype=np.int64)

    def volume(self, tid: int) -> float:
        c = self.coords
        return signed_volume(*(c[v] for v in self.tets[tid].verts))

    def root_of(self, tid: int) -> int:
        while self.tets[tid].parent is not None:
            tid = self.tets[tid].parent
        return tid

    # ------------------------------------------------------------------
    # levels
    def level(self, j: int) -> MeshLevel:
        if not 0 <= j < len(self.levels):
            raise LevelMissing(f"level {j} not built (J={self.J})")
        return self.levels[j]

    def finalize_level(self, j: int, active) -> MeshLevel:
        """Record ``T_j`` from its active tet ids and derive its node sets."""
        active = np.array(sorted(active), dtype=np.int64)
        nverts = self.num_vertices
        tv = self.tet_array(active)
        faces, counts, _ = _face_table(tv)
        once = faces[counts == 1]
        bverts = np.unique(once)
        for v in bverts:
            self.on_boundary[v] = True
        used = np.unique(tv)
        interior = np.array([v for v in used if not self.on_boundary[v]], dtype=np.int64)
        if j == 0:
            region = active.copy()
            c = self.coords
            self.domain_volume = float(np.abs(tet_volumes(c, tv)).sum())
            self.boundary_area = float(_tri_areas(c[once], (0, 1, 2)).sum()) if len(once) else 0.0
            refinement_region = frozenset(int(v) for v in used)
        else:
            new = set(v for v in used if self.birth_level[v] == j)
            mask = np.array([any(v in new for v in row) for row in tv], dtype=bool)
            region = active[mask]
            in_region = set(region.tolist())
            refinement_region = _vertices_with_star_in(tv, active, in_region)
        lvl = MeshLevel(j, active, interior, nverts, region, refinement_region)
        if len(self.levels) == j:
            self.levels.append(lvl)
        else:
            self.levels[j] = lvl
        return lvl

    def new_nodes(self, j: int) -> np.ndarray:
        """Interior nodes born at level ``j`` (the fine set ``N_j^f``)."""
        nodes = self.level(j).interior_nodes
        if j == 0:
            return nodes
        b = np.asarray(self.birth_level)[nodes]
        return nodes[b == j]

    def vertex_stars(self, j: int) -> dict[int, list[int]]:
        lvl = self.level(j)
        stars: dict[int, list[int]] = {}
        for t in lvl.active_tets:
            for v in self.tets[t].verts:
                stars.setdefault(v, []).append(int(t))
        return stars

    # ------------------------------------------------------------------
    # queries
    def adjacency(self, a: int, b: int, j: int) -> Adjacency:
        if a == b:
            raise SelfQuery(f"adjacency of tet {a} with itself")
        active = self.level(j).active_tets
        for t in (a, b):
            idx = np.searchsorted(active, t)
            if idx >= len(active) or active[idx] != t:
                raise NotActive(f"tet {t} is not active at level {j}")
        shared = len(set(self.tets[a].verts) & set(self.tets[b].verts))
        return Adjacency(shared)

    def star(self, x: int, j: int) -> set[int]:
        lvl = self.level(j)
        if not 0 <= x < lvl.num_vertices:
            raise UnknownVertex(f"vertex {x} does not exist at level {j}")
        out = {int(t) for t in lvl.active_tets if x in self.tets[t].verts}
        if not out:
            raise UnknownVertex(f"vertex {x} is not a vertex of T_{j}")
        return out

    def check_conformity(self, j: int, exhaustive: bool = False) -> None:
        """Raise :class:`NonConformingInput` unless ``T_j`` is conforming.

        The default test is a face hash: no face is shared by more than two
        tets and faces seen once exactly tile the level-0 boundary.  The
        exhaustive test separates every pair of nearby tets by a plane through
        their shared vertices.
        """
        lvl = self.level(j)
        tv = self.tet_array(lvl.active_tets)
        c = self.coords
        _check_face_hash(c, tv, self.boundary_area)
        vol = float(np.abs(tet_volumes(c, tv)).sum())
        if abs(vol - self.domain_volume) > 1e-12 * max(self.domain_volume, 1.0):
            raise NonConformingInput(f"level {j} volume {vol} != domain {self.domain_volume}")
        if exhaustive:
            bad = pairwise_conformity_witness(c, tv)
            if bad is not None:
                a, b = bad
                raise NonConformingInput(
                    f"tets {int(lvl.active_tets[a])} and {int(lvl.active_tets[b])} meet improperly")


# ----------------------------------------------------------------------
# face tables and conformity oracles

def _face_table(tv: np.ndarray):
    f = np.concatenate([tv[:, list(face)] for face in TET_FACES])
    f = np.sort(f, axis=1)
    faces, inverse, counts = np.unique(f, axis=0, return_inverse=True, return_counts=True)
    return faces, counts, inverse


def _check_face_hash(coords, tv, boundary_area):
    faces, counts, _ = _face_table(tv)
    if np.any(counts > 2):
        bad = faces[np.argmax(counts > 2)]
        raise NonConformingInput(f"face {tuple(bad)} shared by more than two tets")
    once = faces[counts == 1]
    area = float(_tri_areas(coords[once], (0, 1, 2)).sum()) if len(once) else 0.0
    if abs(area - boundary_area) > 1e-10 * max(boundary_area, 1.0):
        raise NonConformingInput(
            f"unmatched faces cover area {area}, boundary area is {boundary_area}")


def _vertices_with_star_in(tv, active, region_set):
    inside: dict[int, bool] = {}
    for row, t in zip(tv, active):
        ok = int(t) in region_set
        for v in row:
            v = int(v)
            inside[v] = inside.get(v, True) and ok
    return frozenset(v for v, ok in inside.items() if ok)


def _separable(P: np.ndarray, Q: np.ndarray, shared_p, shared_q) -> bool:
    """LP test: is there a plane through the shared vertices strictly separating the rest?"""
    from scipy.optimize import linprog

    # unknowns (n_x, n_y, n_z, c); n.x - c <= -1 for P's own, >= 1 for Q's own, = 0 shared
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for k, x in enumerate(P):
        if k in shared_p:
            a_eq.append([*x, -1.0])
            b_eq.append(0.0)
        else:
            a_ub.append([*x, -1.0])
            b_ub.append(-1.0)
    for k, x in enumerate(Q):
        if k not in shared_q:
            a_ub.append([*(-x), 1.0])
            b_ub.append(-1.0)
    res = linprog(np.zeros(4), A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(a_eq) if a_eq else None, b_eq=np.array(b_eq) if b_eq else None,
                  bounds=[(None, None)] * 4, method="highs")
    return res.status == 0


def pairwise_conformity_witness(coords: np.ndarray, tv: np.ndarray):
    """Exhaustive O(n^2) pair scan; returns the first improper pair or ``None``."""
    p = coords[tv]
    lo, hi = p.min(axis=1), p.max(axis=1)
    tol = 1e-12
    for a in range(len(tv)):
        overlap = np.all(lo[a + 1:] <= hi[a] + tol, axis=1) & np.all(hi[a + 1:] >= lo[a] - tol, axis=1)
        for b in np.nonzero(overlap)[0] + a + 1:
            sa, sb = list(tv[a]), list(tv[b])
            shared = set(sa) & set(sb)
            sp = {k for k, v in enumerate(sa) if v in shared}
            sq = {k for k, v in enumerate(sb) if v in shared}
            if len(shared) == 4 or not _separable(p[a], p[b], sp, sq):
                return a, int(b)
    return None


# ----------------------------------------------------------------------
# construction

KUHN_CUBE_TETS = [
    (0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7),
    (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7),
]


def _cube_vertices(scale):
    return [((i & 1) * scale, ((i >> 1) & 1) * scale, ((i >> 2) & 1) * scale) for i in range(8)]


def build_initial_mesh(domain: str = "cube", scale: float = 1.0, path=None) -> Hierarchy:
    """Build level 0 for a named domain.

    Parameters
    ----------
    domain : str
        ``"cube"`` (unit cube split into six Kuhn tets sharing the main
        diagonal), ``"simplex"`` (reference tetrahedron) or ``"file"``.
    scale : float
        Uniform scaling of the coordinates.
    path : path-like, optional
        Explicit mesh file for ``domain="file"``.
    """
    if domain == "cube":
        verts, tets = _cube_vertices(scale), KUHN_CUBE_TETS
    elif domain == "simplex":
        verts = [(0, 0, 0), (scale, 0, 0), (0, scale, 0), (0, 0, scale)]
        tets = [(0, 1, 2, 3)]
    elif domain == "file":
        if path is None:
            raise ValueError("domain='file' needs a path")
        verts, tets = read_explicit_mesh(path)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    h = from_arrays(verts, tets, exhaustive=(domain == "file"))
    h.name = domain
    return h


def from_arrays(verts, tets, exhaustive: bool = True) -> Hierarchy:
    """Level-0 hierarchy from explicit vertex and tet lists."""
    h = Hierarchy()
    for x in verts:
        h.add_vertex(x, 0)
    ids = []
    for t in tets:
        if len(t) != 4 or any(not 0 <= int(v) < h.num_vertices for v in t):
            raise NonConformingInput(f"bad tet {t}")
        ids.append(h.add_tet(t, 0, TetKind.ROOT))
    tv = h.tet_array(ids)
    faces, counts, _ = _face_table(tv)
    if np.any(counts > 2):
        raise NonConformingInput("face shared by more than two tets")
    if exhaustive:
        bad = pairwise_conformity_witness(h.coords, tv)
        if bad is not None:
            raise NonConformingInput(f"input tets {bad[0]} and {bad[1]} meet improperly")
    h.finalize_level(0, ids)
    return h


def read_explicit_mesh(path):
    """Read ``V T`` header, ``V`` lines of coordinates and ``T`` lines of indices."""
    tokens = Path(path).read_text().split()
    try:
        nv, nt = int(tokens[0]), int(tokens[1])
        vals = tokens[2:]
        if len(vals) != 3 * nv + 4 * nt:
            raise ValueError("wrong number of entries")
        verts = [tuple(float(x) for x in vals[3 * i:3 * i + 3]) for i in range(nv)]
        off = 3 * nv
        tets = [tuple(int(x) for x in vals[off + 4 * i:off + 4 * i + 4]) for i in range(nt)]
    except (IndexError, ValueError) as exc:
        raise NonConformingInput(f"cannot parse mesh file {path}: {exc}") from exc
    return verts, tets


def write_explicit_mesh(path, verts, tets):
    lines = [f"{len(verts)} {len(tets)}"]
    lines += [" ".join(repr(float(c)) for c in x) for x in verts]
    lines += [" ".join(str(int(v)) for v in t) for t in tets]
    Path(path).write_text("\n".join(lines) + "\n")


def touching_pairs(tv: np.ndarray):
    """All unordered pairs of tets sharing at least one vertex, with shared counts."""
    inc: dict[int, list[int]] = {}
    for k, row in enumerate(tv):
        for v in row:
            inc.setdefault(int(v), []).append(k)
    seen = {}
    for ts in inc.values():
        for a, b in combinations(ts, 2):
            key = (a, b) if a < b else (b, a)
            seen[key] = seen.get(key, 0) + 1
    return seen
