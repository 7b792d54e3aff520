"""Numerical checks of the refinement properties and the multilevel stability estimates.

Every check returns a :class:`CheckResult` with the measured constants, the
levels it scanned and a witness (tet pair, node id or sample seed) when it
fails.  Asymptotic equivalences are checked as inter-level stability of the
measured constants, since only the existence of the constants is known.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .fem import FEMHierarchy, h1_norm
from .mesh import GreenType, Hierarchy, NonConformingInput, TetKind, shape_ratios, tet_diameters
from .precond import smoothing_bound_holds, smoothing_counts, smoothing_set
from .solver import extreme_eigs
from .transfer import MultilevelTransfer, scaled_exponents

GREEN_CHILDREN = {GreenType.E1: 2, GreenType.E2F: 3, GreenType.E2O: 4, GreenType.E3F: 4}
GREEN_EDGES = {GreenType.E1: 1, GreenType.E2F: 2, GreenType.E2O: 2, GreenType.E3F: 3}
VOLUME_RTOL = 1e-13


@dataclass
class CheckResult:
    check: str
    anchor: str
    constants: dict = field(default_factory=dict)
    passed: bool = True
    levels: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    per_level: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class VerifyReport:
    seed: int = 0
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, r):
        if isinstance(r, CheckResult):
            self.results.append(r)
        else:
            self.results.extend(r)
        return r

    def __getitem__(self, name: str) -> CheckResult:
        for r in self.results:
            if r.check == name:
                return r
        raise KeyError(name)

    def to_json(self) -> str:
        payload = {"seed": self.seed, "checks": [r.to_dict() for r in self.results]}
        return json.dumps(payload, indent=2, sort_keys=True)

    def table(self) -> str:
        lines = [f"{'check':<24} {'pass':<5} constants"]
        for r in self.results:
            const = ", ".join(f"{k}={_fmt(v)}" for k, v in r.constants.items())
            lines.append(f"{r.check:<24} {'yes' if r.passed else 'NO':<5} {const}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def truncate(h: Hierarchy, J: int) -> Hierarchy:
    """View of ``h`` holding only levels ``0..J`` (stores are shared)."""
    out = copy.copy(h)
    out.levels = h.levels[: J + 1]
    return out


# ----------------------------------------------------------------------
# refinement assumptions
def _active_sets(h):
    return [set(h.level(j).active_tets.tolist()) for j in range(h.J + 1)]


def _refined(h, act, j):
    return sorted(act[j] - act[j + 1])


def check_assumptions(h: Hierarchy, exhaustive_limit: int = 64) -> list[CheckResult]:
    """Rows A1..A6 of the refinement assumptions.

    A1 unique father and tiling, A2 conformity, A3 shape regularity against
    half the level-0 value, A4 green tets stay leaves, A5 only newest tets
    are refined, A6 refinement patterns outside the green set are red.
    """
    act = _active_sets(h)
    levels = list(range(h.J + 1))
    rows = []

    # A1
    wit = []
    for j in range(h.J):
        for t in act[j + 1] - act[j]:
            p = h.tets[t].parent
            if p is None or p not in act[j] or p in act[j + 1]:
                wit.append({"level": j + 1, "tet": t, "reason": "no father on previous level"})
        for p in _refined(h, act, j):
            kids = h.tets[p].children
            if not kids or any(k not in act[j + 1] for k in kids):
                wit.append({"level": j, "tet": p, "reason": "children missing"})
                continue
            vp = h.volume(p)
            vk = sum(h.volume(k) for k in kids)
            if abs(vk - vp) > VOLUME_RTOL * 10 * vp:
                wit.append({"level": j, "tet": p, "reason": f"children volume {vk} vs {vp}"})
    for j in levels:
        vol = sum(h.volume(t) for t in act[j])
        if abs(vol - h.domain_volume) > 1e-12 * h.domain_volume:
            wit.append({"level": j, "reason": f"covered volume {vol}"})
    rows.append(CheckResult("A1", "every tet has exactly one father", {"violations": len(wit)},
                            not wit, levels, wit[:5]))

    # A2
    wit = []
    for j in levels:
        try:
            h.check_conformity(j, exhaustive=len(act[j]) <= exhaustive_limit)
        except NonConformingInput as exc:
            wit.append({"level": j, "reason": str(exc)})
    rows.append(CheckResult("A2", "neighbours meet in a full vertex, edge or face",
                            {"violations": len(wit)}, not wit, levels, wit[:5]))

    # A3
    c = h.coords
    per = []
    for j in levels:
        ids = h.level(j).active_tets
        per.append(float(shape_ratios(c, h.tet_array(ids)).min()))
    ratio = min(per) / per[0]
    wit = [] if ratio >= 0.5 else [{"level": int(np.argmin(per)), "min_shape": min(per)}]
    rows.append(CheckResult("A3", "shape regularity bounded away from zero",
                            {"min_shape": min(per), "level0_shape": per[0], "ratio": ratio, "threshold": 0.5},
                            ratio >= 0.5, levels, wit, per))

    # A4
    wit = [{"tet": t.id, "children": list(t.children)} for t in h.tets if t.is_green and t.children]
    for j in range(h.J):
        wit += [{"level": j, "tet": p} for p in _refined(h, act, j) if h.tets[p].is_green]
    rows.append(CheckResult("A4", "irregular tets are not refined further",
                            {"violations": len(wit)}, not wit, levels, wit[:5]))

    # A5
    wit = []
    for j in range(h.J):
        wit += [{"level": j, "tet": p, "generation": h.tets[p].level}
                for p in _refined(h, act, j) if h.tets[p].level != j]
    rows.append(CheckResult("A5", "only tets of the newest generation are refined",
                            {"violations": len(wit)}, not wit, levels, wit[:5]))

    # A6
    wit = []
    for j in range(h.J):
        for p in _refined(h, act, j):
            msg = _pattern_violation(h, p)
            if msg:
                wit.append({"level": j, "tet": p, "reason": msg})
    rows.append(CheckResult("A6", "patterns outside the green set are refined regularly",
                            {"violations": len(wit)}, not wit, levels, wit[:5]))
    return rows


def _pattern_violation(h: Hierarchy, p: int) -> str | None:
    t = h.tets[p]
    kids = [h.tets[k] for k in t.children]
    kinds = {k.kind for k in kids}
    verts = set(v for k in kids for v in k.verts)
    cut = [e for e in t.edges() if h.edge_midpoint_index.get(e) in verts]
    if kinds == {TetKind.RED}:
        return None if len(kids) == 8 and len(cut) == 6 else "red refinement with wrong children"
    if kinds != {TetKind.GREEN}:
        return f"mixed child kinds {sorted(k.name for k in kinds)}"
    gt = kids[0].green_type
    if gt is None or any(k.green_type != gt for k in kids):
        return "green children disagree on the pattern"
    if len(kids) != GREEN_CHILDREN[gt] or len(cut) != GREEN_EDGES[gt]:
        return f"{gt.name} with {len(kids)} children and {len(cut)} cut edges"
    ends = [set(e) for e in cut]
    if gt == GreenType.E3F and len(set().union(*ends)) != 3:
        return "three cut edges not in a common face"
    if gt == GreenType.E2O and ends[0] & ends[1]:
        return "E2O edges share a vertex"
    if gt == GreenType.E2F and not ends[0] & ends[1]:
        return "E2F edges are opposite"
    return None


# ----------------------------------------------------------------------
# generation bounds and quasiuniformity
def _scan(h: Hierarchy, j: int):
    ids = h.level(j).active_tets
    tv = np.ascontiguousarray(h.tet_array(ids))
    lv = np.ascontiguousarray(h.tet_levels(ids).astype(np.int64))
    diam = np.ascontiguousarray(tet_diameters(h.coords, tv))
    md, w, ratio, rw = kernels.pair_scan(tv, lv, diam, h.level(j).num_vertices)
    return ids, md, w, ratio, rw


def generation_bounds(h: Hierarchy) -> dict:
    """Largest level difference of face-, edge- and vertex-sharing pairs over all levels."""
    out = {"face": 0, "edge": 0, "vertex": 0, "witness": {}, "per_level": []}
    for j in range(h.J + 1):
        ids, md, w, _, _ = _scan(h, j)
        row = {"level": j, "face": int(md[3]), "edge": int(md[2]), "vertex": int(md[1])}
        out["per_level"].append(row)
        for key, s in (("face", 3), ("edge", 2), ("vertex", 1)):
            if md[s] > out[key] or (key not in out["witness"] and w[s, 0] >= 0):
                out[key] = max(out[key], int(md[s]))
                out["witness"][key] = {"level": j, "tets": [int(ids[w[s, 0]]), int(ids[w[s, 1]])]}
    return out


def check_generation_bounds(h: Hierarchy) -> CheckResult:
    """Face-sharing tets differ by at most one generation; E and V stable in ``J``."""
    g = generation_bounds(h)
    const = {"face": g["face"], "E": g["edge"], "V": g["vertex"]}
    ok = g["face"] <= 1
    wit = [] if ok else [g["witness"]["face"]]
    if h.J >= 3:
        prev = g["per_level"][:-1]
        E_prev = max(r["edge"] for r in prev)
        V_prev = max(r["vertex"] for r in prev)
        const.update(E_prev=E_prev, V_prev=V_prev)
        if (E_prev, V_prev) != (g["edge"], g["vertex"]):
            ok = False
            wit.append({"reason": "E or V changed on the last level", "witness": g["witness"]})
    return CheckResult("generation_bounds", "face-adjacent generation difference at most one",
                       const, ok, list(range(h.J + 1)), wit, g["per_level"])


def child_father_constants(h: Hierarchy, J: int | None = None) -> tuple[float, float]:
    """Extremes of ``diam(tau) 2^L(tau) / diam(root(tau))`` over the tets of levels ``0..J``."""
    J = h.J if J is None else J
    ids = np.unique(np.concatenate([h.level(j).active_tets for j in range(J + 1)]))
    c = h.coords
    d = tet_diameters(c, h.tet_array(ids))
    roots = np.array([h.root_of(int(t)) for t in ids])
    d0 = tet_diameters(c, h.tet_array(roots))
    r = d * 2.0 ** h.tet_levels(ids) / d0
    return float(r.min()), float(r.max())


def check_patch_quasiuniformity(h: Hierarchy) -> CheckResult:
    """Diameter ratio of touching tets against ``(c2/c1) 2^max(1,E,V) gamma0``."""
    per = []
    best, wit = 1.0, None
    for j in range(h.J + 1):
        ids, _, _, ratio, rw = _scan(h, j)
        per.append(float(ratio))
        if ratio > best and rw[0] >= 0:
            best, wit = float(ratio), {"level": j, "tets": [int(ids[rw[0]]), int(ids[rw[1]])]}
    g = generation_bounds(h)
    gamma0 = per[0]
    c1, c2 = child_father_constants(h)
    bound = (c2 / c1) * 2.0 ** max(1, g["edge"], g["vertex"]) * gamma0
    const = {"max_ratio": best, "gamma0": gamma0, "c1": c1, "c2": c2, "bound": bound}
    ok = best <= bound
    # green children first appear at level 2, so c2 settles there; compare from J = 3 on
    if h.J >= 3:
        p1, p2 = child_father_constants(h, h.J - 1)
        const.update(c1_prev=p1, c2_prev=p2)
        ok = ok and np.isclose(p1, c1, rtol=1e-12) and np.isclose(p2, c2, rtol=1e-12)
    return CheckResult("patch_quasiuniformity", "touching tets have comparable diameters",
                       const, bool(ok), list(range(h.J + 1)), [] if ok else [wit], per)


def check_smoothing_bound(h: Hierarchy) -> CheckResult:
    ok, lhs, rhs = smoothing_bound_holds(h)
    counts = smoothing_counts(h)
    wit = []
    for j in range(1, h.J + 1):
        s = smoothing_set(h, j).nodes
        region = set(np.unique(h.tet_array(h.level(j).region_tets)).tolist())
        outside = [int(v) for v in s if int(v) not in region]
        if outside:
            ok = False
            wit.append({"level": j, "nodes_outside_region": outside[:5]})
    if not lhs <= rhs:
        wit.append({"sum_times_3": lhs, "bound_times_3": rhs})
    const = {"total": sum(counts), "N_J": h.level(h.J).num_dofs, "N_0": h.level(0).num_dofs,
             "slack_times_3": rhs - lhs}
    return CheckResult("smoothing_bound", "smoothing work is at most 5/3 N_J - 2/3 N_0",
                       const, bool(ok), list(range(h.J + 1)), wit, counts)


# ----------------------------------------------------------------------
# spectral checks
def _eigs(A, iters: int = 200, seed: int = 0):
    n = A.shape[0]
    if n == 0:
        return np.nan, np.nan
    if n <= 400:
        w = np.linalg.eigvalsh(A.toarray() if sp.issparse(A) else A)
        return float(w[0]), float(w[-1])
    return extreme_eigs(A, n, iters=min(n, iters), seed=seed)


def riesz_constants(fem: FEMHierarchy, j: int, scaled: bool = True):
    M = fem.mass(j)
    if scaled:
        D = sp.diags(2.0 ** (1.5 * scaled_exponents(fem.h, j)))
        M = (D @ M @ D).tocsr()
    lo, hi = _eigs(M)
    d = M.diagonal()
    return {"lam_min": lo, "lam_max": hi, "kappa": hi / lo if lo > 0 else np.nan,
            "diag_min": float(d.min()) if len(d) else np.nan,
            "diag_max": float(d.max()) if len(d) else np.nan}


def check_riesz_stability(h: Hierarchy, fem: FEMHierarchy | None = None) -> CheckResult:
    """Conditioning of the scaled Gram matrices ``D M_j D``, ``D = 2^{3/2 L_{j,i}}``."""
    fem = fem or FEMHierarchy(h)
    per = []
    for j in range(1, h.J + 1):
        s = riesz_constants(fem, j, True)
        u = riesz_constants(fem, j, False)
        per.append({"level": j, "kappa": s["kappa"], "kappa_unscaled": u["kappa"],
                    "lam_min": s["lam_min"], "lam_max": s["lam_max"],
                    "diag_min": s["diag_min"], "diag_max": s["diag_max"]})
    ok, wit = True, []
    # level 1 has a single fine node on the cube, so the comparison starts at 2
    if len(per) >= 2 and per[-2]["level"] >= 2:
        a, b = per[-2]["kappa"], per[-1]["kappa"]
        if not max(a, b) / min(a, b) <= 2:
            ok = False
            wit.append({"levels": [h.J - 1, h.J], "kappa": [a, b]})
    dmin = min(p["diag_min"] for p in per) if per else np.nan
    dmax = max(p["diag_max"] for p in per) if per else np.nan
    const = {"kappa_J": per[-1]["kappa"] if per else np.nan, "diag_min": dmin, "diag_max": dmax}
    return CheckResult("riesz_stability", "scaled hats form an L2-stable basis",
                       const, ok, list(range(1, h.J + 1)), wit, per)


def sample_functions(h: Hierarchy, n: int = 60, seed: int = 0) -> list[np.ndarray]:
    """Level-``J`` test vectors: rough random coefficients, prolongated hats and smooth interpolants."""
    rng = np.random.default_rng(seed)
    fem_t = MultilevelTransfer(FEMHierarchy(h))
    J = h.J
    nodes = h.level(J).interior_nodes
    x = h.coords[nodes]
    out = []
    n_rand, n_hat = n // 3, n // 3
    for _ in range(n_rand):
        out.append(rng.standard_normal(len(nodes)))
    for _ in range(n_hat):
        j = int(rng.integers(1, J + 1))
        m = h.level(j).num_dofs
        e = np.zeros(m)
        e[int(rng.integers(m))] = 1.0
        out.append(fem_t.prolongate(e, j))
    bubble = x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]) * x[:, 2] * (1 - x[:, 2])
    while len(out) < n:
        k = rng.integers(1, 4, size=3)
        s = np.prod(np.sin(np.pi * k * x), axis=1)
        out.append(s if len(out) % 2 else s + 10 * rng.standard_normal() * bubble)
    return out


def _weighted_slices(slices, mass):
    return float(sum(4.0**j * (s @ (mass @ s)) for j, s in enumerate(slices)))


def norm_ratios(h: Hierarchy, samples, gamma: float | None = None, transfer=None):
    """``R(u) = sum_j 4^j ||slice_j u||^2 / ||u||_H1^2`` for each sample."""
    t = transfer or MultilevelTransfer(FEMHierarchy(h))
    M, H = t.fem.mass(h.J), t.fem.h1_matrix(h.J)
    out = []
    for u in samples:
        out.append(_weighted_slices(t.slices(u, gamma), M) / h1_norm(u, H) ** 2)
    return np.array(out)


def check_norm_equivalence(h: Hierarchy, n_samples: int = 60, seed: int = 0,
                           gammas=(0.0, 0.02, 0.1), growth: float = 0.15) -> CheckResult:
    """Spread ``max R / min R`` for exact and approximate projections, compared with level ``J-1``.

    Growth is only asserted when ``J-1 >= 2``; below that the coarser level has
    too few nodes for the spread to mean anything.
    """
    per, wit, ok = [], [], True
    const = {}
    spreads = {}
    slice_dev = 0.0
    pert = {}
    for J in (h.J - 1, h.J):
        hh = truncate(h, J)
        t = MultilevelTransfer(FEMHierarchy(hh))
        samples = sample_functions(hh, n_samples, seed)
        M = t.fem.mass(J)
        row = {"level": J}
        exact = norm_ratios(hh, samples, None, t)
        row["bpx"] = [float(exact.min()), float(exact.max())]
        spreads[("bpx", J)] = exact.max() / exact.min()
        for g in gammas:
            r = norm_ratios(hh, samples, g, t)
            row[f"whb_{g}"] = [float(r.min()), float(r.max())]
            spreads[(f"whb_{g}", J)] = r.max() / r.min()
            if g > 0:
                c = 0.0
                for u in samples:
                    e = [a - b for a, b in zip(t.slices(u, g), t.slices(u))]
                    c = max(c, _weighted_slices(e, M) / (g**2 * _weighted_slices(t.slices(u), M)))
                pert[(g, J)] = c
        if J == h.J:
            dev = np.abs(norm_ratios(hh, samples, 0.0, t) - exact) / exact
            slice_dev = float(dev.max())
        per.append(row)
    for key in ["bpx"] + [f"whb_{g}" for g in gammas]:
        a, b = spreads[(key, h.J - 1)], spreads[(key, h.J)]
        const[f"spread_{key}"] = float(b)
        const[f"growth_{key}"] = float(b / a - 1)
        if h.J - 1 >= 2 and key in ("bpx", "whb_0.0", "whb_0.02") and b / a - 1 > growth:
            ok = False
            wit.append({"family": key, "spread": [float(a), float(b)], "seed": seed})
    for g in gammas:
        if g > 0:
            const[f"perturbation_c_{g}"] = pert[(g, h.J)]
            const[f"perturbation_c_{g}_prev"] = pert[(g, h.J - 1)]
    const["whb0_vs_bpx_rel"] = slice_dev
    if slice_dev > 1e-8:
        ok = False
        wit.append({"reason": "gamma=0 slices differ from exact slices", "seed": seed})
    return CheckResult("norm_equivalence", "multilevel slice norms are equivalent to the H1 norm",
                       const, ok, [h.J - 1, h.J], wit, per)


def h1_stability(h: Hierarchy, samples, transfer=None) -> float:
    """``max_j max_u ||Q_j u||_H1 / ||u||_H1``."""
    t = transfer or MultilevelTransfer(FEMHierarchy(h))
    H = t.fem.h1_matrix(h.J)
    best = 0.0
    for u in samples:
        nu = h1_norm(u, H)
        for j in range(h.J + 1):
            best = max(best, h1_norm(t.prolongate(t.l2_project(u, j), j), H) / nu)
    return best


def check_h1_stability(h: Hierarchy, n_samples: int = 60, seed: int = 0, growth: float = 0.15) -> CheckResult:
    per = []
    for J in (h.J - 1, h.J):
        hh = truncate(h, J)
        per.append(h1_stability(hh, sample_functions(hh, n_samples, seed)))
    ok = abs(per[1] / per[0] - 1) <= growth
    wit = [] if ok else [{"max_ratio": per, "seed": seed}]
    return CheckResult("h1_stability", "L2 projections are H1-stable",
                       {"max_ratio_J": per[1], "max_ratio_prev": per[0]}, bool(ok), [h.J - 1, h.J], wit, per)


def fine_fine_operator(fem: FEMHierarchy, j: int):
    """``A_ff^{(j)}`` in the scaled basis: Galerkin matrix of ``2^{3j/2}(I - Q_{j-1}) phi_i``, i new on ``j``.

    Returned as a dense matrix; the coarse mass solves use a sparse LU factor.
    """
    t = MultilevelTransfer(fem)
    fine = t.fine_positions(j)
    n = fem.mass(j).shape[0]
    E = sp.csr_matrix((np.ones(len(fine)), (fine, np.arange(len(fine)))), shape=(n, len(fine)))
    P = t.P(j - 1)
    X = (P.T @ (fem.mass(j) @ E)).toarray()
    M0 = fem.mass(j - 1)
    Y = spla.splu(M0.tocsc()).solve(X) if M0.shape[0] else np.zeros((0, len(fine)))
    Psi = E.toarray() - P @ Y
    Aff = Psi.T @ (fem.stiffness(j) @ Psi)
    return 2.0 ** (3 * j) * (Aff + Aff.T) / 2


def check_aff_conditioning(h: Hierarchy, fem: FEMHierarchy | None = None, levels=None) -> CheckResult:
    """Fine-fine blocks are well conditioned with ``lambda_max`` growing like ``4^j``."""
    fem = fem or FEMHierarchy(h)
    levels = list(range(1, h.J + 1)) if levels is None else list(levels)
    per = []
    for j in levels:
        A = fine_fine_operator(fem, j)
        w = np.linalg.eigvalsh(A)
        per.append({"level": j, "n_fine": len(A), "lam_min": float(w[0]), "lam_max": float(w[-1]),
                    "kappa": float(w[-1] / w[0]),
                    "lam_min_scaled": float(w[0] / 4.0**j), "lam_max_scaled": float(w[-1] / 4.0**j)})
    ok, wit = True, []
    # level 1 has a single fine node on the cube, so the range starts at 2
    tail = [p for p in per if p["level"] >= 2]
    if tail:
        ks = [p["kappa"] for p in tail]
        kr = max(ks) / min(ks)
        if kr > 2:
            ok = False
            wit.append({"levels": [p["level"] for p in tail], "kappa_spread": kr})
    for a, b in zip(tail, tail[1:]):
        lr = b["lam_max"] / a["lam_max"]
        if not 2 <= lr <= 8:
            ok = False
            wit.append({"levels": [a["level"], b["level"]], "lam_max_ratio": lr})
    const = {"kappa_max": max(p["kappa"] for p in per), "kappa_min": min(p["kappa"] for p in per)}
    return CheckResult("aff_conditioning", "fine-fine stiffness blocks scale like 4^j",
                       const, ok, levels, wit, per)


def run_all(h: Hierarchy, seed: int = 0, n_samples: int = 60, spectral: bool = True) -> VerifyReport:
    rep = VerifyReport(seed=seed)
    rep.add(check_assumptions(h))
    rep.add(check_generation_bounds(h))
    rep.add(check_patch_quasiuniformity(h))
    rep.add(check_smoothing_bound(h))
    if spectral and h.J >= 2:
        fem = FEMHierarchy(h)
        rep.add(check_riesz_stability(h, fem))
        rep.add(check_norm_equivalence(h, n_samples, seed))
        rep.add(check_h1_stability(h, n_samples, seed))
        rep.add(check_aff_conditioning(h, fem))
    return rep


__all__ = [
    "CheckResult", "VerifyReport", "check_assumptions", "check_generation_bounds",
    "check_patch_quasiuniformity", "check_smoothing_bound", "check_riesz_stability",
    "check_norm_equivalence", "check_h1_stability", "check_aff_conditioning",
    "run_all", "truncate", "sample_functions", "norm_ratios", "fine_fine_operator",
    "generation_bounds", "child_father_constants", "riesz_constants",
]
