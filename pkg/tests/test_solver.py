import numpy as np
import pytest
import scipy.sparse as sp

from redgreen.fem import Coefficients, FEMHierarchy, l2_error
from redgreen.solver import (
    BreakdownNegativeCurvature,
    NotConverged,
    extreme_eigs,
    lanczos,
    pcg,
    preconditioned_eigs,
)
from redgreen.verify import fine_fine_operator, truncate


def test_identity_converges_in_one_step():
    b = np.arange(1.0, 11.0)
    x, rep = pcg(np.eye(10), b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b)
    assert rep.kappa == pytest.approx(1.0)


def test_two_by_two_spectrum_exact():
    A = np.diag([1.0, 10.0])
    x, rep = pcg(A, np.ones(2), tol=1e-14)
    assert rep.iterations == 2
    assert rep.lam_min == pytest.approx(1.0, abs=1e-8)
    assert rep.lam_max == pytest.approx(10.0, abs=1e-8)


def test_report_fields_and_dict():
    A = sp.diags(np.linspace(1, 5, 30))
    _, rep = pcg(A, np.ones(30), tol=1e-12)
    d = rep.to_dict()
    assert set(d) == {"iterations", "residual", "true_residual", "lam_min", "lam_max", "kappa", "converged"}
    assert rep.lam_min <= rep.lam_max and rep.kappa >= 1
    assert rep.true_residual < 1e-10


def test_energy_nonincreasing():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(40, 40)))
    A = Q @ np.diag(np.logspace(0, 3, 40)) @ Q.T
    _, rep = pcg(A, rng.normal(size=40), tol=1e-12, maxit=200)
    e = np.array(rep.energy)
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e).max())


def test_not_converged():
    A = np.diag(np.arange(1.0, 51.0))
    x, rep = pcg(A, np.ones(50), maxit=3)
    assert not rep.converged and rep.iterations == 3
    with pytest.raises(NotConverged) as exc:
        pcg(A, np.ones(50), maxit=3, strict=True)
    np.testing.assert_array_equal(exc.value.x, x)
    assert exc.value.report.iterations == 3


def test_negative_curvature():
    with pytest.raises(BreakdownNegativeCurvature):
        pcg(np.diag([1.0, -1.0]), np.ones(2))
    with pytest.raises(BreakdownNegativeCurvature):
        pcg(np.eye(2), np.ones(2), M=lambda r: -r)


def test_extreme_eigs_examples():
    assert extreme_eigs(np.eye(5), 5, 5) == pytest.approx((1.0, 1.0))
    lo, hi = extreme_eigs(np.diag(np.arange(1.0, 51.0)), 50, 50)
    assert lo == pytest.approx(1.0, abs=1e-6) and hi == pytest.approx(50.0, abs=1e-6)


def test_lanczos_general_inner_product():
    rng = np.random.default_rng(1)
    G = np.diag(rng.uniform(1, 2, 20))
    K = rng.normal(size=(20, 20))
    K = K @ K.T + np.eye(20)
    # G^-1 K is self-adjoint in the G inner product
    w = lanczos(lambda x: np.linalg.solve(G, K @ x), 20, 20, inner=G)
    ref = np.linalg.eigvals(np.linalg.solve(G, K)).real
    assert w.min() == pytest.approx(ref.min(), rel=1e-8)
    assert w.max() == pytest.approx(ref.max(), rel=1e-8)


def test_estimates_within_gershgorin(hier):
    A = FEMHierarchy(hier("ball", 2)).stiffness(2)
    lo, hi = extreme_eigs(A, A.shape[0], 100)
    D = A.toarray()
    radius = np.abs(D).sum(axis=1) - np.abs(np.diag(D))
    assert lo >= (np.diag(D) - radius).min() - 1e-12
    assert hi <= (np.diag(D) + radius).max() + 1e-12
    w = np.linalg.eigvalsh(D)
    assert (lo, hi) == pytest.approx((w[0], w[-1]), rel=1e-10)


def test_preconditioned_eigs_diagonal_preconditioner():
    A = np.diag(np.arange(1.0, 21.0))
    lo, hi = preconditioned_eigs(A, lambda r: r / np.arange(1.0, 21.0), 20, 20)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)


def test_fine_fine_spectrum_scales_like_four_to_the_j(hier):
    h = hier("corner", 4)
    fem = FEMHierarchy(h)
    scaled = []
    for j in range(1, 5):
        w = np.linalg.eigvalsh(fine_fine_operator(fem, j)) / 4.0**j
        scaled.append((w[0], w[-1]))
    lo = min(s[0] for s in scaled)
    hi = max(s[1] for s in scaled)
    assert max(s[0] for s in scaled) / lo <= 4
    assert hi / min(s[1] for s in scaled) <= 4


def _manufactured_errors(hier, levels):
    exact = lambda p: np.prod(p * (1 - p), axis=1)  # noqa: E731

    def f(p):
        x, y, z = p.T
        return 2 * (y * (1 - y) * z * (1 - z) + x * (1 - x) * z * (1 - z) + x * (1 - x) * y * (1 - y))

    h = hier("uniform", max(levels))
    errs = []
    for J in levels:
        hj = truncate(h, J)
        fem = FEMHierarchy(hj, Coefficients(p=1.0, q=0.0, f=f))
        A, b = fem.stiffness(J), fem.load(J)
        x, rep = pcg(A, b, tol=1e-12, maxit=2000)
        assert rep.converged
        errs.append(l2_error(hj, J, x, exact))
    return errs


def test_manufactured_solution_second_order(hier):
    e = _manufactured_errors(hier, [2, 3])
    assert 3.5 <= e[0] / e[1] <= 4.5
