"""Red-green refinement of tetrahedral hierarchies.

Marked tets are refined regularly (octasection through edge midpoints).
Hanging nodes on neighbours are removed by a closure that either cuts the
neighbour with one of four green patterns or promotes it to red.  Green
children are never refined again and only tets born on the current level
may be refined.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    TET_EDGES,
    GreenType,
    Hierarchy,
    MeshError,
    Tet,
    TetKind,
    edge_key,
)

__all__ = [
    "GreenType",
    "Pattern",
    "EdgeMarkMap",
    "classify_pattern",
    "red_refine",
    "green_refine",
    "mark_closure",
    "refine_level",
    "marker",
    "refine_scenario",
    "octahedron_diagonals",
]

log = logging.getLogger(__name__)


class RefinementError(MeshError):
    pass


class GreenRefinementForbidden(RefinementError):
    """Closure or a seed reached a green tet (they may not be refined)."""

    def __init__(self, msg, tet=None, seed=None):
        super().__init__(msg)
        self.tet = tet
        self.seed = seed


class WrongLevel(RefinementError):
    """Refinement requested for a tet not born on the current level."""

    def __init__(self, msg, tet=None, seed=None):
        super().__init__(msg)
        self.tet = tet
        self.seed = seed


class UnsupportedPattern(RefinementError):
    pass


class EmptyRefinement(RefinementError):
    pass


class Pattern(enum.Enum):
    NONE = "none"
    E1 = "E1"
    E2F = "E2F"
    E2O = "E2O"
    E3F = "E3F"
    PROMOTE = "promote"
    RED = "red"


_GREEN = {Pattern.E1: GreenType.E1, Pattern.E2F: GreenType.E2F,
          Pattern.E2O: GreenType.E2O, Pattern.E3F: GreenType.E3F}
_FACE_EDGE_SETS = [
    frozenset(k for k, e in enumerate(TET_EDGES) if set(e) <= set(face))
    for face in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
]


def classify_pattern(bits) -> Pattern:
    """Map a set of marked local edge indices (0..5) to a refinement pattern."""
    bits = frozenset(bits)
    n = len(bits)
    if n == 0:
        return Pattern.NONE
    if n == 6:
        return Pattern.RED
    if n == 1:
        return Pattern.E1
    if n == 2:
        a, b = (TET_EDGES[k] for k in bits)
        return Pattern.E2F if set(a) & set(b) else Pattern.E2O
    if n == 3 and bits in _FACE_EDGE_SETS:
        return Pattern.E3F
    return Pattern.PROMOTE


@dataclass
class EdgeMarkMap:
    """Globally consistent set of marked edges on level ``j``."""

    level: int
    marked: set = field(default_factory=set)
    patterns: dict = field(default_factory=dict)

    def pattern_bits(self, t: Tet) -> frozenset:
        v = t.verts
        return frozenset(k for k, (a, b) in enumerate(TET_EDGES) if edge_key(v[a], v[b]) in self.marked)

    def pattern(self, t: Tet) -> Pattern:
        return classify_pattern(self.pattern_bits(t))


# ----------------------------------------------------------------------
# subdivision rules

def octahedron_diagonals(h: Hierarchy, m: dict) -> list[tuple[float, tuple[int, int], tuple]]:
    """The three candidate interior diagonals as (length, sorted id pair, local edge pair)."""
    c = h.coords
    out = []
    for e, f in (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))):
        a, b = m[e], m[f]
        out.append((float(np.linalg.norm(c[a] - c[b])), edge_key(a, b), (e, f)))
    return out


def _select_diagonal(h, m, verts):
    """Shortest diagonal; ties go to the one whose parent edges are shortest, then to ids."""
    diags = octahedron_diagonals(h, m)
    shortest = min(d[0] for d in diags)
    cands = [d for d in diags if d[0] <= shortest * (1 + 1e-12)]
    c = h.coords

    def span(d):
        return max(float(np.linalg.norm(c[verts[a]] - c[verts[b]])) for a, b in d[2])

    best = min(span(d) for d in cands)
    cands = [d for d in cands if span(d) <= best * (1 + 1e-12)]
    return min(cands, key=lambda d: d[1])


def _midpoints(h, t, level):
    v = t.verts
    return {(a, b): h.midpoint(v[a], v[b], level) for a, b in TET_EDGES}


def _check_refinable(h: Hierarchy, t: Tet, j: int):
    if t.is_green:
        raise GreenRefinementForbidden(f"tet {t.id} is green and cannot be refined", tet=t.id)
    if t.level != j:
        raise WrongLevel(f"tet {t.id} has level {t.level}, refining level {j}", tet=t.id)
    if t.children:
        raise RefinementError(f"tet {t.id} already refined")


def red_refine(h: Hierarchy, tid: int, j: int | None = None) -> list[int]:
    """Octasect tet ``tid`` into eight children of level ``L+1``."""
    t = h.tets[tid]
    j = t.level if j is None else j
    _check_refinable(h, t, j)
    m = _midpoints(h, t, j + 1)
    v = t.verts
    mm = lambda a, b: m[(min(a, b), max(a, b))]  # noqa: E731
    kids = []
    for k in range(4):
        others = [i for i in range(4) if i != k]
        kids.append((v[k], *(mm(k, i) for i in others)))
    _, _, (e, f) = _select_diagonal(h, m, v)
    a, b = m[e], m[f]
    ring = _octahedron_ring([ed for ed in TET_EDGES if ed not in (e, f)])
    for k in range(4):
        kids.append((a, b, m[ring[k]], m[ring[(k + 1) % 4]]))
    return [h.add_tet(c, j + 1, TetKind.RED, parent=tid) for c in kids]


def _octahedron_ring(rest):
    """Order the four equatorial edges so consecutive midpoints are octahedron neighbours."""
    ring = [rest[0]]
    pool = list(rest[1:])
    while pool:
        nxt = next(ed for ed in pool if set(ed) & set(ring[-1]))
        ring.append(nxt)
        pool.remove(nxt)
    return ring


def _face_three_split(h, a, b, c, mab, mac):
    """Split triangle (a,b,c) with marked edges ab, ac into three triangles.

    The quadrilateral (mab, b, c, mac) is cut along its shorter diagonal,
    ties going to the diagonal through min(b, c).  The rule depends on the
    face only, so both tets sharing the face agree.
    """
    x = h.coords
    d1 = np.linalg.norm(x[mab] - x[c])
    d2 = np.linalg.norm(x[mac] - x[b])
    if abs(d1 - d2) <= 1e-12 * max(d1, d2):
        use_mab_c = c < b
    else:
        use_mab_c = d1 < d2
    if use_mab_c:
        return [(a, mab, mac), (mab, b, c), (mab, c, mac)]
    return [(a, mab, mac), (mac, b, c), (mab, b, mac)]


def green_refine(h: Hierarchy, tid: int, pattern: GreenType, bits, j: int | None = None) -> list[int]:
    """Cut tet ``tid`` with a green pattern; ``bits`` are the marked local edges."""
    t = h.tets[tid]
    j = t.level if j is None else j
    _check_refinable(h, t, j)
    v = t.verts
    edges = [TET_EDGES[k] for k in sorted(bits)]
    mid = {e: h.midpoint(v[e[0]], v[e[1]], j + 1) for e in edges}
    if pattern == GreenType.E1:
        (a, b), = edges
        c, d = (i for i in range(4) if i not in (a, b))
        m = mid[(a, b)]
        kids = [(v[a], m, v[c], v[d]), (m, v[b], v[c], v[d])]
    elif pattern == GreenType.E2F:
        e1, e2 = edges
        (a,) = set(e1) & set(e2)
        b = e1[0] if e1[1] == a else e1[1]
        c = e2[0] if e2[1] == a else e2[1]
        (d,) = set(range(4)) - {a, b, c}
        tris = _face_three_split(h, v[a], v[b], v[c], mid[e1], mid[e2])
        kids = [(*tri, v[d]) for tri in tris]
    elif pattern == GreenType.E2O:
        (a, b), (c, d) = edges
        mab, mcd = mid[(a, b)], mid[(c, d)]
        kids = [(v[a], mab, v[c], mcd), (v[a], mab, mcd, v[d]),
                (mab, v[b], v[c], mcd), (mab, v[b], mcd, v[d])]
    elif pattern == GreenType.E3F:
        face = sorted(set().union(*edges))
        (d,) = set(range(4)) - set(face)
        a, b, c = face
        mab, mac, mbc = mid[(a, b)], mid[(a, c)], mid[(b, c)]
        tris = [(v[a], mab, mac), (mab, v[b], mbc), (mac, mbc, v[c]), (mab, mbc, mac)]
        kids = [(*tri, v[d]) for tri in tris]
    else:
        raise UnsupportedPattern(f"pattern {pattern!r}")
    return [h.add_tet(k, j + 1, TetKind.GREEN, parent=tid, green_type=pattern) for k in kids]


# ----------------------------------------------------------------------
# closure

def _edge_incidence(h: Hierarchy, active):
    inc: dict[tuple[int, int], list[int]] = {}
    for t in active:
        for e in h.tets[t].edges():
            inc.setdefault(e, []).append(int(t))
    return inc


def mark_closure(h: Hierarchy, j: int, seeds=(), seed_edges=(), complete_faces: bool = True) -> EdgeMarkMap:
    """Close a set of seed tets / edges into a conforming red-green marking.

    Seed tets get all six edges marked.  Any tet whose marked edges do not
    form one of the green patterns is promoted to red, which marks its
    remaining edges, until nothing changes.  With ``complete_faces`` a face
    carrying two marked edges also gets its third edge marked, so the E2F
    pattern never survives closure (its corner child is badly shaped).

    Raises
    ------
    GreenRefinementForbidden, WrongLevel
        If a seed or a tet reached by the closure is green or was born
        before level ``j``.  The exception's ``seed`` attribute names the
        seed tet whose marks propagated there.
    """
    lvl = h.level(j)
    inc = _edge_incidence(h, lvl.active_tets)
    marks = EdgeMarkMap(j)
    origin: dict[tuple[int, int], int | None] = {}
    work: list[int] = []

    def mark(e, src):
        if e not in marks.marked:
            marks.marked.add(e)
            origin[e] = src
            work.extend(inc[e])

    active_set = set(int(t) for t in lvl.active_tets)
    for s in seeds:
        s = int(s)
        if s not in active_set:
            raise RefinementError(f"seed tet {s} not active at level {j}")
        t = h.tets[s]
        if t.is_green:
            raise GreenRefinementForbidden(f"seed tet {s} is green", tet=s, seed=s)
        if t.level != j:
            raise WrongLevel(f"seed tet {s} has level {t.level} != {j}", tet=s, seed=s)
        for e in t.edges():
            mark(e, s)
    for e in seed_edges:
        e = edge_key(*e)
        if e not in inc:
            raise RefinementError(f"seed edge {e} is not an edge of T_{j}")
        mark(e, None)

    while work:
        tid = work.pop()
        t = h.tets[tid]
        bits = marks.pattern_bits(t)
        if not bits:
            continue
        src = next((origin[e] for e in t.edges() if e in marks.marked), None)
        if t.is_green:
            raise GreenRefinementForbidden(
                f"closure reaches green tet {tid}", tet=tid, seed=src)
        if t.level != j:
            raise WrongLevel(f"closure reaches tet {tid} of level {t.level}", tet=tid, seed=src)
        p = classify_pattern(bits)
        if p == Pattern.PROMOTE:
            for e in t.edges():
                mark(e, src)
        elif p == Pattern.E2F and complete_faces:
            face = set().union(*(TET_EDGES[k] for k in bits))
            v = t.verts
            for a, b in TET_EDGES:
                if a in face and b in face:
                    mark(edge_key(v[a], v[b]), src)
    for t in lvl.active_tets:
        p = marks.pattern(h.tets[t])
        if p != Pattern.NONE:
            marks.patterns[int(t)] = p
    return marks


def is_closed(h: Hierarchy, marks: EdgeMarkMap, complete_faces: bool = True) -> bool:
    lvl = h.level(marks.level)
    bad = {Pattern.PROMOTE, Pattern.E2F} if complete_faces else {Pattern.PROMOTE}
    return all(marks.pattern(h.tets[t]) not in bad for t in lvl.active_tets)


def refine_level(h: Hierarchy, marks: EdgeMarkMap) -> Hierarchy:
    """Refine ``T_j`` according to a closed marking and append ``T_{j+1}``."""
    j = marks.level
    if j != h.J:
        raise WrongLevel(f"can only refine the finest level {h.J}, got {j}")
    lvl = h.level(j)
    new_active = []
    refined = 0
    for tid in lvl.active_tets:
        t = h.tets[int(tid)]
        bits = marks.pattern_bits(t)
        p = classify_pattern(bits)
        if p == Pattern.NONE:
            new_active.append(int(tid))
        elif p == Pattern.RED:
            new_active += red_refine(h, t.id, j)
            refined += 1
        elif p in _GREEN:
            new_active += green_refine(h, t.id, _GREEN[p], bits, j)
            refined += 1
        else:
            raise UnsupportedPattern(f"tet {t.id} has unclosed pattern {sorted(bits)}")
    if refined == 0:
        raise EmptyRefinement(f"no tet of level {j} is marked")
    h.finalize_level(j + 1, new_active)
    return h


# ----------------------------------------------------------------------
# markers

def _point_triangle_distance(p, a, b, c):
    # closest point on triangle, Ericson "Real-Time Collision Detection" 5.1.5
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return np.linalg.norm(p - a)
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return np.linalg.norm(p - b)
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return np.linalg.norm(p - (a + d1 / (d1 - d3) * ab))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return np.linalg.norm(p - c)
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return np.linalg.norm(p - (a + d2 / (d2 - d6) * ac))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return np.linalg.norm(p - (b + w * (c - b)))
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return np.linalg.norm(p - (a + ab * v + ac * w))


def point_tet_distance(p, x) -> float:
    """Euclidean distance from point ``p`` to the closed tet with corners ``x``."""
    p = np.asarray(p, dtype=float)
    t = np.column_stack([x[1] - x[0], x[2] - x[0], x[3] - x[0]])
    lam = np.linalg.solve(t, p - x[0])
    if lam.min() >= 0 and lam.sum() <= 1:
        return 0.0
    return min(_point_triangle_distance(p, *(x[i] for i in f))
               for f in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)))


def marker(h: Hierarchy, strategy: str, j: int | None = None, **params) -> list[int]:
    """Seed tets on level ``j`` for a refinement strategy.

    Only refinable candidates are returned (born on level ``j``, not green).

    ``uniform``
        every candidate.
    ``ball``
        candidates intersecting the closed ball ``center``, ``radius``.
    ``vertex_singularity``
        candidates having the vertex at coordinates ``corner`` as a corner.
    """
    j = h.J if j is None else j
    lvl = h.level(j)
    cands = [int(t) for t in lvl.active_tets
             if h.tets[t].level == j and not h.tets[t].is_green]
    if strategy == "uniform":
        return cands
    c = h.coords
    if strategy == "ball":
        center = np.asarray(params.get("center", (0.5, 0.5, 0.5)), dtype=float)
        radius = float(params.get("radius", 0.25))
        return [t for t in cands if point_tet_distance(center, c[list(h.tets[t].verts)]) <= radius]
    if strategy == "vertex_singularity":
        corner = np.asarray(params.get("corner", (0.0, 0.0, 0.0)), dtype=float)
        hit = np.nonzero(np.all(np.abs(c[:lvl.num_vertices] - corner) < 1e-12, axis=1))[0]
        if len(hit) == 0:
            return []
        x = int(hit[0])
        return [t for t in cands if x in h.tets[t].verts]
    raise ValueError(f"unknown marker strategy {strategy!r}")


def admissible_closure(h: Hierarchy, j: int, seeds, complete_faces: bool = True) -> tuple[EdgeMarkMap, list[int]]:
    """Close ``seeds``, dropping the seeds whose closure would refine a green or older tet.

    Seeds touching a non-refinable tet are removed up front; any remaining
    conflict drops the seed the offending marks came from, one at a time.
    Returns the closed marking and the list of dropped seeds.
    """
    lvl = h.level(j)
    refinable = {int(t): h.tets[t].level == j and not h.tets[t].is_green for t in lvl.active_tets}
    blocked = set()
    for t, ok in refinable.items():
        if not ok:
            blocked.update(h.tets[t].verts)
    dropped = [s for s in seeds if blocked.intersection(h.tets[s].verts)]
    seeds = [s for s in seeds if not blocked.intersection(h.tets[s].verts)]
    while True:
        try:
            return mark_closure(h, j, seeds, complete_faces=complete_faces), dropped
        except (GreenRefinementForbidden, WrongLevel) as exc:
            if exc.seed is None or exc.seed not in seeds:
                raise
            seeds.remove(exc.seed)
            dropped.append(exc.seed)


SCENARIOS = {
    "uniform": ("uniform", {}),
    "corner": ("vertex_singularity", {"corner": (0.0, 0.0, 0.0)}),
    "ball": ("ball", {"center": (0.2, 0.2, 0.2), "radius": 0.3}),
}


def refine_scenario(h: Hierarchy, scenario: str, J: int, complete_faces: bool = True, **params) -> Hierarchy:
    """Refine ``h`` to ``J`` levels with a named marker scenario.

    Seeds whose closure would touch a green tet or a tet born on an older
    level are dropped rather than aborting the run; the marker itself only
    proposes refinable tets.
    """
    strategy, defaults = SCENARIOS.get(scenario, (scenario, {}))
    kw = {**defaults, **params}
    while h.J < J:
        j = h.J
        seeds = marker(h, strategy, j, **kw)
        marks, dropped = admissible_closure(h, j, seeds, complete_faces)
        if dropped:
            log.info("level %d: dropped %d of %d seeds", j, len(dropped), len(seeds))
        if not marks.marked:
            raise EmptyRefinement(f"scenario {scenario!r} marks nothing on level {j}")
        refine_level(h, marks)
    return h
