import copy
import itertools
import json

import numpy as np
import pytest

from redgreen.fem import FEMHierarchy
from redgreen.mesh import Tet, TetKind, tet_diameters
from redgreen.refine import mark_closure, refine_level
from redgreen.transfer import MultilevelTransfer
from redgreen.verify import (
    check_aff_conditioning,
    check_assumptions,
    check_generation_bounds,
    check_patch_quasiuniformity,
    check_riesz_stability,
    check_smoothing_bound,
    child_father_constants,
    fine_fine_operator,
    generation_bounds,
    h1_stability,
    norm_ratios,
    riesz_constants,
    run_all,
    sample_functions,
    truncate,
)


def _structural(h):
    return (check_assumptions(h) + [check_generation_bounds(h), check_patch_quasiuniformity(h),
                                    check_smoothing_bound(h)])


def _brute_generation_bounds(h, j):
    lvl = h.level(j)
    best = {1: 0, 2: 0, 3: 0}
    for a, b in itertools.combinations(lvl.active_tets.tolist(), 2):
        s = len(set(h.tets[a].verts) & set(h.tets[b].verts))
        if s:
            best[s] = max(best[s], abs(h.tets[a].level - h.tets[b].level))
    return best


# ----------------------------------------------------------------------
# assumptions

def test_uniform_all_pass_and_shape_ratio_kept(hier):
    h = hier("uniform", 3)
    rep = run_all(h, seed=0, n_samples=12)
    assert rep.passed, rep.table()
    a3 = rep["A3"].constants
    assert a3["min_shape"] == pytest.approx(a3["level0_shape"], rel=1e-12)


def test_corner_all_pass(hier):
    rep = run_all(truncate(hier("corner", 5), 4), seed=1, n_samples=30)
    assert rep.passed, rep.table()
    assert [r.check for r in rep.results][:6] == ["A1", "A2", "A3", "A4", "A5", "A6"]


def test_green_tet_with_child_fails_only_a4(hier):
    h = copy.deepcopy(hier("ball", 3))
    g = next(int(t) for t in h.level(3).active_tets if h.tets[t].is_green)
    kid = Tet(len(h.tets), h.tets[g].verts, h.tets[g].level + 1, TetKind.RED, parent=g)
    h.tets.append(kid)
    h.tets[g].children.append(kid.id)
    failed = [r for r in _structural(h) if not r.passed]
    assert [r.check for r in failed] == ["A4"]
    assert failed[0].witnesses[0]["tet"] == g


def test_refined_old_tet_fails_only_a5(hier):
    h = copy.deepcopy(hier("corner", 3))
    # relabel a tet refined on level 2 as if it were born earlier
    act2, act3 = set(h.level(2).active_tets.tolist()), set(h.level(3).active_tets.tolist())
    p = min(act2 - act3)
    h.tets[p].level -= 1
    failed = {r.check for r in check_assumptions(h) if not r.passed}
    assert failed == {"A5"}


# ----------------------------------------------------------------------
# generation bounds and patches

def test_uniform_generation_differences_zero(hier):
    g = generation_bounds(hier("uniform", 3))
    assert (g["face"], g["edge"], g["vertex"]) == (0, 0, 0)


def test_single_seed_face_difference_one(fresh):
    h = fresh("uniform", 1)
    refine_level(h, mark_closure(h, 1, [int(h.level(1).active_tets[0])]))
    g = generation_bounds(h)
    assert g["face"] == 1
    assert _brute_generation_bounds(h, 2)[3] == 1


@pytest.mark.parametrize("scenario", ["corner", "ball"])
def test_generation_bounds_match_brute_force(hier, scenario):
    h = hier(scenario, 3)
    g = generation_bounds(h)
    for row in g["per_level"]:
        b = _brute_generation_bounds(h, row["level"])
        assert (row["vertex"], row["edge"], row["face"]) == (b[1], b[2], b[3])


def test_corner_e_v_stable(hier):
    h = hier("corner", 5)
    a, b = generation_bounds(truncate(h, 2)), generation_bounds(truncate(h, 4))
    assert (a["edge"], a["vertex"]) == (b["edge"], b["vertex"])


def test_patch_ratio_uniform_and_corner(hier):
    u = check_patch_quasiuniformity(hier("uniform", 3))
    assert u.passed and u.constants["max_ratio"] <= u.constants["gamma0"] * (1 + 1e-12)
    h = hier("corner", 5)
    r3 = check_patch_quasiuniformity(truncate(h, 3)).constants["max_ratio"]
    r5 = check_patch_quasiuniformity(h).constants["max_ratio"]
    assert r3 == r5


@pytest.mark.parametrize("scenario", ["corner", "ball"])
def test_child_father_constants_settle_at_first_green_level(hier, scenario):
    h = hier(scenario, 4)
    consts = [child_father_constants(h, j) for j in range(5)]
    assert consts[1] == (1.0, 1.0)
    assert consts[2] == consts[3] == consts[4]
    # a shallow hierarchy has nothing to compare against yet
    assert check_patch_quasiuniformity(truncate(h, 2)).passed
    assert check_patch_quasiuniformity(h).passed


def test_corner_chain_diameter_halves(hier):
    h = hier("corner", 5)
    origin = 0
    d = []
    for j in range(h.J + 1):
        t = [t for t in h.level(j).active_tets if origin in h.tets[t].verts and h.tets[t].level == j]
        d.append(tet_diameters(h.coords, h.tet_array(t)).max())
    np.testing.assert_allclose(np.array(d[1:]) / np.array(d[:-1]), 0.5, rtol=1e-14)


def test_smoothing_bound_rows(hier):
    r = check_smoothing_bound(hier("uniform", 3))
    assert r.passed and r.constants["slack_times_3"] > 0
    assert check_smoothing_bound(hier("corner", 4)).passed
    assert check_smoothing_bound(truncate(hier("corner", 4), 0)).constants["slack_times_3"] == 0


# ----------------------------------------------------------------------
# spectral checks

def test_riesz_uniform_scaling_is_scalar(hier):
    fem = FEMHierarchy(hier("uniform", 2))
    s, u = riesz_constants(fem, 2, True), riesz_constants(fem, 2, False)
    assert s["kappa"] == pytest.approx(u["kappa"], rel=1e-12)


def test_riesz_corner_scaled_stable_unscaled_not(hier):
    h = hier("corner", 4)
    r = check_riesz_stability(h)
    assert r.passed
    k = {p["level"]: p for p in r.per_level}
    assert max(k[4]["kappa"], k[2]["kappa"]) / min(k[4]["kappa"], k[2]["kappa"]) <= 2
    assert k[4]["kappa_unscaled"] >= 2 * k[2]["kappa_unscaled"]


def test_prolongated_hat_has_no_higher_slices(hier):
    h = hier("corner", 4)
    t = MultilevelTransfer(FEMHierarchy(h))
    e = np.zeros(t.fem.mass(2).shape[0])
    e[0] = 1.0
    s = t.slices(t.prolongate(e, 2))
    M = t.fem.mass(4)
    for j in (3, 4):
        assert np.sqrt(s[j] @ M @ s[j]) < 1e-9


def test_norm_ratios_match_dense_oracle(hier):
    h = hier("ball", 2)
    t = MultilevelTransfer(FEMHierarchy(h))
    samples = sample_functions(h, 9, seed=3)
    got = norm_ratios(h, samples, None, t)
    M, H = t.fem.mass(2).toarray(), t.fem.h1_matrix(2).toarray()
    ref = []
    for u in samples:
        q = []
        for j in range(3):
            P = t.P_to(j, 2).toarray()
            q.append(P @ np.linalg.solve(P.T @ M @ P, P.T @ M @ u) if P.shape[1] else np.zeros_like(u))
        sl = [q[0]] + [q[j] - q[j - 1] for j in (1, 2)]
        ref.append(sum(4.0**j * s @ M @ s for j, s in enumerate(sl)) / (u @ H @ u))
    np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_h1_stability_examples(hier):
    h = hier("corner", 3)
    t = MultilevelTransfer(FEMHierarchy(h))
    H = t.fem.h1_matrix(3)
    c = np.random.default_rng(0).normal(size=t.fem.mass(2).shape[0])
    u = t.prolongate(c, 2)
    back = t.prolongate(t.l2_project(u, 2), 2)
    assert np.sqrt(back @ H @ back) / np.sqrt(u @ H @ u) == pytest.approx(1.0, abs=1e-9)
    assert h1_stability(h, [u], t) >= 1.0 - 1e-12


def test_fine_fine_matches_dense_oracle(hier):
    h = hier("ball", 2)
    fem = FEMHierarchy(h)
    t = MultilevelTransfer(fem)
    P = t.P(1).toarray()
    M, A = fem.mass(2).toarray(), fem.stiffness(2).toarray()
    E = np.eye(M.shape[0])[:, t.fine_positions(2)]
    Psi = E - P @ np.linalg.solve(P.T @ M @ P, P.T @ M @ E)
    ref = np.linalg.eigvalsh(8.0**2 * Psi.T @ A @ Psi)
    got = np.linalg.eigvalsh(fine_fine_operator(fem, 2))
    assert got[-1] / got[0] == pytest.approx(ref[-1] / ref[0], rel=1e-6)
    one = np.linalg.eigvalsh(fine_fine_operator(FEMHierarchy(hier("uniform", 1)), 1))
    assert len(one) == 1


def test_fine_fine_scaling(hier):
    r = check_aff_conditioning(hier("corner", 4))
    assert r.passed
    lam = [p["lam_max"] for p in r.per_level]
    assert all(2 <= b / a <= 8 for a, b in zip(lam[1:], lam[2:]))


# ----------------------------------------------------------------------
# report

def test_report_json_deterministic(hier):
    h = hier("corner", 3)
    a, b = run_all(h, seed=4, n_samples=9).to_json(), run_all(h, seed=4, n_samples=9).to_json()
    assert a == b
    d = json.loads(a)
    assert d["seed"] == 4 and all("pass" in c and "levels" in c for c in d["checks"])
