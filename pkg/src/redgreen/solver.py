"""Preconditioned conjugate gradients and Lanczos eigenvalue estimates."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal


class SolverError(RuntimeError):
    pass


class NotConverged(SolverError):
    def __init__(self, msg, x=None, report=None):
        super().__init__(msg)
        self.x = x
        self.report = report


class BreakdownNegativeCurvature(SolverError):
    pass


def as_operator(A):
    if A is None:
        return lambda x: x
    if callable(A):
        return A
    return lambda x: A @ x


@dataclass
class SolveReport:
    iterations: int
    residual: float
    true_residual: float
    lam_min: float
    lam_max: float
    kappa: float
    converged: bool
    wall_time: float = 0.0
    energy: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        """JSON-friendly fields; wall time is left out so reports are reproducible."""
        d = asdict(self)
        d.pop("wall_time")
        d.pop("energy")
        return d


def cg_tridiagonal(alphas, betas):
    """Lanczos tridiagonal (diagonal, off-diagonal) from CG step lengths."""
    k = len(alphas)
    d = np.empty(k)
    e = np.empty(max(k - 1, 0))
    for i in range(k):
        d[i] = 1.0 / alphas[i] + (betas[i - 1] / alphas[i - 1] if i > 0 else 0.0)
        if i < k - 1:
            e[i] = np.sqrt(betas[i]) / alphas[i]
    return d, e


def tridiagonal_extremes(d, e):
    if len(d) == 0:
        return np.nan, np.nan
    w = eigh_tridiagonal(d, e, eigvals_only=True)
    return float(w[0]), float(w[-1])


def pcg(A, b, M=None, tol: float = 1e-10, maxit: int = 1000, x0=None, strict: bool = False):
    """Solve ``A x = b`` by PCG with preconditioner ``M`` (an SPD apply).

    Convergence is measured in the preconditioned residual norm
    ``sqrt(r^T M r)`` relative to its initial value.  Extreme eigenvalues of
    ``M A`` are estimated from the Lanczos matrix built out of the CG
    coefficients.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    t0 = time.perf_counter()
    Aop, Mop = as_operator(A), as_operator(M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - Aop(x) if x0 is not None else b.copy()
    z = Mop(r)
    rz = float(r @ z)
    if rz < 0:
        raise BreakdownNegativeCurvature("preconditioner is not positive definite")
    norm0 = np.sqrt(rz)
    alphas, betas, energy = [], [], [float(-0.5 * x @ (r + b))]
    it = 0
    res = 1.0 if norm0 > 0 else 0.0
    p = z.copy()
    while res > tol and it < maxit:
        Ap = Aop(p)
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise BreakdownNegativeCurvature(f"p^T A p = {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = Mop(r)
        rz_new = float(r @ z)
        if rz_new < 0:
            raise BreakdownNegativeCurvature("preconditioner is not positive definite")
        beta = rz_new / rz
        alphas.append(alpha)
        betas.append(beta)
        energy.append(float(-0.5 * x @ (r + b)))
        rz = rz_new
        p = z + beta * p
        it += 1
        res = np.sqrt(rz) / norm0
    lo, hi = tridiagonal_extremes(*cg_tridiagonal(alphas, betas))
    nb = np.linalg.norm(b)
    true_res = float(np.linalg.norm(b - Aop(x)) / nb) if nb > 0 else 0.0
    report = SolveReport(
        iterations=it, residual=float(res), true_residual=true_res,
        lam_min=lo, lam_max=hi, kappa=hi / lo if lo > 0 else np.inf,
        converged=bool(res <= tol), wall_time=time.perf_counter() - t0, energy=energy,
    )
    if strict and not report.converged:
        raise NotConverged(f"PCG stopped at residual {res:.3e} after {it} iterations", x, report)
    return x, report


def lanczos(op, dim: int, iters: int, inner=None, seed: int = 0, v0=None) -> np.ndarray:
    """Ritz values of ``op`` after ``iters`` Lanczos steps with full reorthogonalization.

    ``op`` must be self-adjoint with respect to the inner product
    ``<x, y> = x^T G y`` where ``G`` is ``inner`` (identity by default).
    """
    op, G = as_operator(op), as_operator(inner)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) if v0 is None else np.array(v0, dtype=float)
    Gv = G(v)
    nrm2 = float(v @ Gv)
    if nrm2 <= 0:
        raise BreakdownNegativeCurvature("inner product is not positive definite")
    v, Gv = v / np.sqrt(nrm2), Gv / np.sqrt(nrm2)
    V, GV = [v], [Gv]
    alpha, beta = [], []
    for k in range(min(iters, dim)):
        w = op(V[-1])
        alpha.append(float(GV[-1] @ w))
        Vm, GVm = np.array(V), np.array(GV)
        for _ in range(2):
            w = w - Vm.T @ (GVm @ w)
        Gw = G(w)
        b2 = float(w @ Gw)
        if b2 < 0 and abs(b2) > 1e-12 * abs(alpha[-1]) ** 2:
            raise BreakdownNegativeCurvature("inner product is not positive definite")
        bk = np.sqrt(max(b2, 0.0))
        if k == min(iters, dim) - 1 or bk <= 1e-13 * max(abs(a) for a in alpha):
            break
        beta.append(bk)
        V.append(w / bk)
        GV.append(Gw / bk)
    return eigh_tridiagonal(np.array(alpha), np.array(beta[:len(alpha) - 1]), eigvals_only=True)


def extreme_eigs(op, dim: int, iters: int = 100, inner=None, seed: int = 0) -> tuple[float, float]:
    """Smallest and largest Ritz values of a self-adjoint operator."""
    if dim == 0:
        return np.nan, np.nan
    w = lanczos(op, dim, iters, inner=inner, seed=seed)
    return float(w[0]), float(w[-1])


def preconditioned_eigs(A, B, dim: int, iters: int = 100, seed: int = 0) -> tuple[float, float]:
    """Extreme eigenvalues of ``B A`` via Lanczos in the ``A`` inner product."""
    Aop, Bop = as_operator(A), as_operator(B)
    return extreme_eigs(lambda x: Bop(Aop(x)), dim, iters, inner=Aop, seed=seed)
