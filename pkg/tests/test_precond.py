import numpy as np
import pytest
import scipy.linalg

import oracles
from redgreen.fem import FEMHierarchy
from redgreen.mesh import build_initial_mesh, from_arrays
from redgreen.precond import (
    ConfigError,
    KINDS,
    PreconditionerConfig,
    bpx_apply,
    hb_apply,
    level_weight,
    make_preconditioner,
    smoothing_bound_holds,
    smoothing_counts,
    smoothing_set,
    whb_apply,
)
from redgreen.refine import refine_scenario
from redgreen.solver import pcg
from redgreen.transfer import MultilevelTransfer, build_prolongation
from redgreen.verify import truncate


def _transfer(h):
    return MultilevelTransfer(FEMHierarchy(h))


@pytest.fixture(scope="module")
def coarse_mesh(hier):
    """Level 2 of the uniform cube taken as a level-0 mesh with 27 interior nodes."""
    u = hier("uniform", 2)
    lvl = u.level(2)
    return u.coords[: lvl.num_vertices].copy(), u.tet_array(lvl.active_tets)


def _from_coarse(coarse_mesh, scenario=None, J=0):
    h = from_arrays(*coarse_mesh, exhaustive=False)
    if J:
        refine_scenario(h, scenario, J)
    return h


# ----------------------------------------------------------------------
# smoothing sets

def _changed_hats_oracle(h, j):
    """Old nodes whose level-(j-1) hat is not a single level-j hat."""
    P = build_prolongation(h, j - 1).matrix.tocsc()
    coarse = h.level(j - 1).interior_nodes
    return {int(coarse[c]) for c in range(P.shape[1]) if P[:, c].nnz > 1}


@pytest.mark.parametrize("scenario", ["uniform", "corner", "ball"])
def test_smoothing_set_definition(hier, scenario):
    h = hier(scenario, 3)
    for j in range(1, h.J + 1):
        s = smoothing_set(h, j)
        new = set(h.new_nodes(j).tolist())
        assert set(s.new_nodes.tolist()) == new
        assert set(s.nodes.tolist()) == new | _changed_hats_oracle(h, j)
        nodes = set(s.nodes.tolist())
        assert new <= nodes <= set(h.level(j).interior_nodes.tolist())
        region_vertices = set(h.tet_array(h.level(j).region_tets).ravel().tolist())
        assert nodes <= region_vertices


def test_uniform_smoothing_set_is_everything(hier):
    h = hier("uniform", 3)
    for j in range(h.J + 1):
        assert len(smoothing_set(h, j)) == h.level(j).num_dofs


def test_untouched_node_not_smoothed(hier):
    h = hier("corner", 4)
    s = set(smoothing_set(h, 4).nodes.tolist())
    far = [v for v in h.level(3).interior_nodes if np.linalg.norm(h.coords[v]) > 0.5]
    assert far and not s.intersection(far)


@pytest.mark.parametrize("scenario,J", [("uniform", 4), ("corner", 3), ("corner", 5), ("ball", 4)])
def test_smoothing_bound(hier, scenario, J):
    h = truncate(hier(scenario, 5 if scenario == "corner" else J), J)
    ok, lhs, rhs = smoothing_bound_holds(h)
    assert ok and lhs == 3 * sum(smoothing_counts(h))


def test_smoothing_bound_equality_at_level_zero(coarse_mesh):
    h = _from_coarse(coarse_mesh)
    ok, lhs, rhs = smoothing_bound_holds(h)
    assert ok and lhs == rhs == 3 * 27


# ----------------------------------------------------------------------
# operators

def test_level_weight_is_two_to_the_j():
    assert [level_weight(j) for j in range(6)] == [1, 2, 4, 8, 16, 32]


def test_config_errors():
    with pytest.raises(ConfigError):
        PreconditionerConfig("mg")
    with pytest.raises(ConfigError):
        PreconditionerConfig("whb", gamma=1.0)
    with pytest.raises(ConfigError):
        PreconditionerConfig("whb", gamma=-0.1)
    with pytest.raises(ConfigError):
        PreconditionerConfig("bpx", smoother="gauss-seidel")


def test_single_level_is_exact_coarse_solve(coarse_mesh):
    t = _transfer(_from_coarse(coarse_mesh))
    A = t.fem.stiffness(0).toarray()
    r = np.random.default_rng(0).normal(size=len(A))
    exact = scipy.linalg.solve(A, r)
    for out in (bpx_apply(t, r), hb_apply(t, r), whb_apply(t, r, 0.0), whb_apply(t, r, 0.1)):
        np.testing.assert_allclose(out, exact, rtol=1e-12)


def test_coarse_solve_with_refinement(coarse_mesh):
    h = _from_coarse(coarse_mesh, "corner", 2)
    t = _transfer(h)
    A = t.fem.stiffness(2)
    b = np.ones(A.shape[0])
    for kind in KINDS:
        x, rep = pcg(A, b, make_preconditioner(t, kind, 0.02 if kind == "whb" else 0.0), tol=1e-10)
        assert rep.converged and rep.true_residual < 1e-8


@pytest.mark.parametrize("kind,gamma", [("bpx", 0), ("hb", 0), ("whb", 0), ("whb", 0.1)])
def test_linear_and_symmetric(hier, kind, gamma):
    t = _transfer(hier("ball", 3))
    B = make_preconditioner(t, kind, gamma)
    n = t.fem.stiffness(3).shape[0]
    rng = np.random.default_rng(1)
    for _ in range(20):
        u, v = rng.normal(size=(2, n))
        lhs, rhs = B(u) @ v, u @ B(v)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)
    a, b = rng.normal(size=2)
    combo = a * B(u) + b * B(v)
    assert np.linalg.norm(B(a * u + b * v) - combo) <= 1e-12 * np.linalg.norm(combo)


def test_jacobi_smoother_variant(hier):
    t = _transfer(hier("corner", 3))
    B = make_preconditioner(t, "bpx", smoother="jacobi")
    A = t.fem.stiffness(3)
    lam = oracles.dense_preconditioned_spectrum(A, B)
    assert lam.min() > 0


def test_hb_ignores_residual_orthogonal_to_new_hats(hier):
    h = hier("ball", 2)
    t = _transfer(h)
    fine = t.fine_positions(2)
    r = np.random.default_rng(2).normal(size=t.fem.stiffness(2).shape[0])
    r[fine] = 0.0
    coarse = _transfer(truncate(h, 1))
    np.testing.assert_allclose(hb_apply(t, r), t.P(1) @ hb_apply(coarse, t.P(1).T @ r), atol=1e-13)


@pytest.mark.parametrize("scenario,J", [("uniform", 2), ("ball", 2), ("corner", 3)])
@pytest.mark.parametrize("kind", KINDS)
def test_condition_number_matches_dense_oracle(hier, scenario, J, kind):
    from redgreen.solver import preconditioned_eigs

    h = truncate(hier(scenario, J), J)
    t = _transfer(h)
    A = t.fem.stiffness(J)
    B = make_preconditioner(t, kind, 0.02 if kind == "whb" else 0.0)
    lam = oracles.dense_preconditioned_spectrum(A, B)
    lo, hi = preconditioned_eigs(A, B, A.shape[0], iters=A.shape[0], seed=0)
    assert hi / lo == pytest.approx(lam.max() / lam.min(), rel=1e-6)


def test_whb_exact_slices_match_l2_slices(hier):
    t = _transfer(hier("corner", 4))
    u = np.random.default_rng(3).normal(size=t.fem.mass(4).shape[0])
    for a, b in zip(t.slices(u, 0.0), t.slices(u)):
        np.testing.assert_allclose(a, b, atol=1e-9)
