"""P1 finite elements on a level of the hierarchy.

Assembles ``a(u, v) = int p grad u . grad v + q u v`` and the L2 Gram
(mass) matrix over the interior nodes of ``T_j`` (homogeneous Dirichlet
data eliminated by dropping boundary rows and columns).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import kernels
from .mesh import DegenerateTet, Hierarchy, LevelMissing

Field = Union[float, np.ndarray, Callable]


class DimensionMismatch(ValueError):
    pass


@dataclass
class Coefficients:
    """PDE data.  ``p`` and ``q`` are sampled once per tet at the centroid.

    ``p`` is a 3x3 SPD matrix or a callable mapping centroids ``(m, 3)`` to
    ``(m, 3, 3)``; ``q`` a nonnegative scalar or callable returning ``(m,)``;
    ``f`` a callable on points ``(n, 3)``.
    """

    p: Field = 1.0
    q: Field = 0.0
    f: Callable | None = None

    def p_at(self, centroids: np.ndarray) -> np.ndarray:
        m = len(centroids)
        if callable(self.p):
            out = np.asarray(self.p(centroids), dtype=float).reshape(m, 3, 3)
        else:
            p = np.asarray(self.p, dtype=float)
            if p.ndim == 0:
                p = p * np.eye(3)
            if not np.allclose(p, p.T) or np.linalg.eigvalsh(p).min() <= 0:
                raise ValueError("p must be symmetric positive definite")
            out = np.broadcast_to(p, (m, 3, 3))
        return np.ascontiguousarray(out)

    def q_at(self, centroids: np.ndarray) -> np.ndarray:
        if callable(self.q):
            out = np.asarray(self.q(centroids), dtype=float).reshape(len(centroids))
        else:
            if float(self.q) < 0:
                raise ValueError("q must be nonnegative")
            out = np.full(len(centroids), float(self.q))
        return np.ascontiguousarray(out)


UNIT_H1 = Coefficients(p=1.0, q=1.0)


def element_matrices(x: np.ndarray, coeff: Coefficients):
    """Stiffness, mass and load of one tet with corner coordinates ``x`` (4, 3).

    The load uses the vertex rule ``int f phi_k ~ vol/4 f(x_k)``.
    """
    x = np.asarray(x, dtype=float)
    vol, g = kernels.p1_geometry(np.ascontiguousarray(x), np.arange(4, dtype=np.int64).reshape(1, 4))
    if not abs(vol[0]) > 0:
        raise DegenerateTet("zero-volume tet")
    c = x.mean(axis=0, keepdims=True)
    p = coeff.p_at(c)[0]
    q = coeff.q_at(c)[0]
    av = abs(vol[0])
    K = av * g[0] @ p @ g[0].T
    M = q * av / 20.0 * (np.ones((4, 4)) + np.eye(4))
    F = np.zeros(4) if coeff.f is None else av / 4.0 * np.asarray(coeff.f(x), dtype=float)
    return K, M, F


def l2_norm_linear(values, x) -> float:
    """L2 norm over a tet of the linear function with vertex ``values``."""
    x = np.asarray(x, dtype=float)
    vol = abs(np.linalg.det(x[1:] - x[0])) / 6.0
    if not vol > 0:
        raise DegenerateTet("zero-volume tet")
    g = np.asarray(values, dtype=float)
    return float(np.sqrt(vol / 20.0 * (g @ g + g.sum() ** 2)))


def _full_matrices(h: Hierarchy, j: int, coeff: Coefficients):
    lvl = h.level(j)
    tv = np.ascontiguousarray(h.tet_array(lvl.active_tets))
    coords = np.ascontiguousarray(h.coords[:lvl.num_vertices])
    cent = coords[tv].mean(axis=1)
    rows, cols, kv, mv = kernels.assemble_coo(coords, tv, coeff.p_at(cent), coeff.q_at(cent))
    n = lvl.num_vertices
    K = sp.csr_matrix((kv, (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((mv, (rows, cols)), shape=(n, n))
    F = np.zeros(n)
    if coeff.f is not None:
        vol = np.abs(kernels.p1_geometry(coords, tv)[0])
        fv = np.asarray(coeff.f(coords), dtype=float)
        np.add.at(F, tv.ravel(), (np.repeat(vol / 4.0, 4) * fv[tv.ravel()]))
    return K, M, F


def assemble_full(h: Hierarchy, j: int, coeff: Coefficients):
    """Stiffness (with the ``q`` term), mass and load over all vertices of ``T_j``."""
    K, Mq, F = _full_matrices(h, j, coeff)
    _, M, _ = _full_matrices(h, j, Coefficients(p=1.0, q=1.0))
    return (K + Mq).tocsr(), M, F


def assemble(h: Hierarchy, j: int, coeff: Coefficients):
    """Interior-node system ``(A, M, F)`` of level ``j``.

    ``A`` is the matrix of ``a(., .)``, ``M`` the unweighted L2 Gram matrix.
    """
    A, M, F = assemble_full(h, j, coeff)
    idx = h.level(j).interior_nodes
    return _restrict(A, idx), _restrict(M, idx), F[idx]


def _restrict(A, idx):
    A = A.tocsr()[idx][:, idx]
    A.sort_indices()
    return A.tocsr()


class FEMHierarchy:
    """Per-level matrices of one PDE on one hierarchy, built lazily and cached."""

    def __init__(self, h: Hierarchy, coeff: Coefficients | None = None):
        self.h = h
        self.coeff = coeff or Coefficients()
        self._cache: dict = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _check(self, j):
        if not 0 <= j <= self.h.J:
            raise LevelMissing(f"level {j} not built")

    def stiffness(self, j: int) -> sp.csr_matrix:
        self._check(j)
        return self._get(("A", j), lambda: assemble(self.h, j, self.coeff)[0])

    def mass(self, j: int) -> sp.csr_matrix:
        self._check(j)
        return self._get(("M", j), lambda: assemble(self.h, j, Coefficients())[1])

    def load(self, j: int) -> np.ndarray:
        self._check(j)
        return self._get(("F", j), lambda: assemble(self.h, j, self.coeff)[2])

    def h1_matrix(self, j: int) -> sp.csr_matrix:
        """Gram matrix of the full H1 inner product (unit coefficients)."""
        self._check(j)
        return self._get(("H1", j), lambda: assemble(self.h, j, UNIT_H1)[0])

    def h1_norm(self, u, j: int) -> float:
        return h1_norm(u, self.h1_matrix(j))

    def l2_norm(self, u, j: int) -> float:
        u = np.asarray(u, dtype=float)
        M = self.mass(j)
        if u.shape != (M.shape[0],):
            raise DimensionMismatch(f"vector of length {u.shape} on level with {M.shape[0]} dofs")
        return float(np.sqrt(max(u @ (M @ u), 0.0)))


def h1_norm(u, H) -> float:
    """``sqrt(u^T H u)`` for the H1 Gram matrix ``H`` of a level."""
    u = np.asarray(u, dtype=float)
    if u.shape != (H.shape[0],):
        raise DimensionMismatch(f"vector of length {u.shape} on level with {H.shape[0]} dofs")
    return float(np.sqrt(max(u @ (H @ u), 0.0)))


def tet_quadrature(n: int = 3):
    """Conical-product Gauss rule on the reference tet, exact to degree ``2n - 1``.

    Returns barycentric points ``(n^3, 4)`` and weights summing to one.
    """
    from scipy.special import roots_jacobi

    t2, w2 = roots_jacobi(n, 2.0, 0.0)
    t1, w1 = roots_jacobi(n, 1.0, 0.0)
    t0, w0 = roots_jacobi(n, 0.0, 0.0)
    a, b, c = (t2 + 1) / 2, (t1 + 1) / 2, (t0 + 1) / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = np.einsum("i,j,k->ijk", w2, w1, w0)
    x = A
    y = (1 - A) * B
    z = (1 - A) * (1 - B) * C
    lam = np.stack([1 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    w = W.ravel()
    return lam, w / w.sum()


def l2_error(h: Hierarchy, j: int, u_interior, exact: Callable, n: int = 3) -> float:
    """``||u_h - u||_L2`` for a level-``j`` interior vector against a callable ``u``."""
    lvl = h.level(j)
    full = np.zeros(lvl.num_vertices)
    full[lvl.interior_nodes] = u_interior
    tv = h.tet_array(lvl.active_tets)
    x = h.coords[tv]  # (m, 4, 3)
    vol = np.abs(np.linalg.det(x[:, 1:] - x[:, :1])) / 6.0
    lam, w = tet_quadrature(n)
    pts = np.einsum("qk,mkd->mqd", lam, x)
    uh = np.einsum("qk,mk->mq", lam, full[tv])
    ue = np.asarray(exact(pts.reshape(-1, 3)), dtype=float).reshape(uh.shape)
    return float(np.sqrt(np.sum(vol[:, None] * w[None] * (uh - ue) ** 2)))


def write_matrix_market(path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, symmetry="general")
