"""Inter-level operators on a nested hierarchy of P1 spaces.

Vectors on level ``j`` hold coefficients of the interior hats of ``T_j`` in
the order of ``h.level(j).interior_nodes``.  ``P_j`` maps level-``j``
coefficients to level-``j+1`` coefficients of the same function, ``R_j``
picks the values at the level-``j`` nodes (nodal interpolation ``I_j``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import FEMHierarchy
from .mesh import DegenerateTet, Hierarchy, LevelMissing
from .solver import pcg

# extreme eigenvalues of diag(M)^-1 M for any P1 mass matrix in 3D
JACOBI_MASS_BOUNDS = (0.5, 2.5)


class SolverStall(RuntimeError):
    pass


@dataclass
class Prolongation:
    """Matrix of the embedding ``S_j -> S_{j+1}`` in nodal coefficients."""

    level: int
    matrix: sp.csr_matrix
    coarse_nodes: np.ndarray
    fine_nodes: np.ndarray

    def __matmul__(self, u):
        return self.matrix @ u

    @property
    def T(self):
        return self.matrix.T


def build_prolongation(h: Hierarchy, j: int, full: bool = False) -> Prolongation:
    """Prolongation from level ``j`` to ``j+1``.

    With ``full=True`` rows and columns range over every vertex of the two
    levels (boundary included), otherwise over interior nodes only, which
    drops the zero boundary values.
    """
    coarse, fine = h.level(j), h.level(j + 1)
    if full:
        cn = np.arange(coarse.num_vertices)
        fn = np.arange(fine.num_vertices)
    else:
        cn, fn = coarse.interior_nodes, fine.interior_nodes
    col = -np.ones(fine.num_vertices, dtype=np.int64)
    col[cn] = np.arange(len(cn))
    rows, cols, vals = [], [], []
    for r, v in enumerate(fn):
        v = int(v)
        if v < coarse.num_vertices:
            if col[v] >= 0:
                rows.append(r), cols.append(col[v]), vals.append(1.0)
            continue
        for p in h.midpoint_parents[v]:
            if col[p] >= 0:
                rows.append(r), cols.append(col[p]), vals.append(0.5)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(len(fn), len(cn)))
    return Prolongation(j, P, cn, fn)


def chebyshev_steps(gamma: float, bounds=JACOBI_MASS_BOUNDS) -> int:
    """Fewest Chebyshev steps whose worst-case energy error factor is at most ``gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    kappa = bounds[1] / bounds[0]
    sigma = (np.sqrt(kappa) - 1) / (np.sqrt(kappa) + 1)
    k = 0
    while 2 * sigma**k / (1 + sigma ** (2 * k)) > gamma:
        k += 1
    return k


def chebyshev_solve(A, b, dinv, steps: int, bounds=JACOBI_MASS_BOUNDS):
    """``steps`` Chebyshev iterations for ``A x = b`` from ``x = 0`` with Jacobi scaling.

    The result is a fixed polynomial in ``diag^-1 A`` applied to ``b``, so the
    map ``b -> x`` is linear and symmetric.
    """
    lo, hi = bounds
    theta, delta = (hi + lo) / 2, (hi - lo) / 2
    x = np.zeros_like(b)
    if steps == 0:
        return x
    r = b.copy()
    sigma = theta / delta
    rho = 1 / sigma
    d = dinv * r / theta
    for _ in range(steps):
        x = x + d
        r = r - A @ d
        rho_new = 1 / (2 * sigma - rho)
        d = rho_new * rho * d + 2 * rho_new / delta * (dinv * r)
        rho = rho_new
    return x


class MultilevelTransfer:
    """Transfer operators of one hierarchy, with cached matrices.

    Parameters
    ----------
    fem : FEMHierarchy
        Supplies the per-level mass matrices.
    tol : float
        Relative residual for exact projections.
    """

    def __init__(self, fem: FEMHierarchy, tol: float = 1e-12, maxit: int = 500):
        self.fem = fem
        self.h = fem.h
        self.tol = tol
        self.maxit = maxit
        self._P: dict[int, sp.csr_matrix] = {}
        self._PJ: dict[tuple[int, int], sp.csr_matrix] = {}
        self._R: dict[int, np.ndarray] = {}

    @property
    def J(self) -> int:
        return self.h.J

    def _check(self, *levels):
        for j in levels:
            if not 0 <= j <= self.J:
                raise LevelMissing(f"level {j} not built (J={self.J})")

    def P(self, j: int) -> sp.csr_matrix:
        """Prolongation ``S_j -> S_{j+1}``."""
        self._check(j, j + 1)
        if j not in self._P:
            self._P[j] = build_prolongation(self.h, j).matrix
        return self._P[j]

    def P_to(self, j: int, k: int) -> sp.csr_matrix:
        """Composed prolongation ``S_j -> S_k`` for ``j <= k``."""
        self._check(j, k)
        if (j, k) not in self._PJ:
            n = self.fem.mass(j).shape[0]
            out = sp.identity(n, format="csr")
            for i in range(j, k):
                out = (self.P(i) @ out).tocsr()
            self._PJ[(j, k)] = out
        return self._PJ[(j, k)]

    def coarse_positions(self, j: int) -> np.ndarray:
        """Positions of the level-``j`` nodes inside the level-``j+1`` vector."""
        self._check(j, j + 1)
        if j not in self._R:
            fine = self.h.level(j + 1).interior_nodes
            coarse = self.h.level(j).interior_nodes
            pos = np.searchsorted(fine, coarse)
            if len(coarse) and not np.array_equal(fine[pos], coarse):
                raise LevelMissing(f"levels {j} and {j + 1} are not nested")
            self._R[j] = pos
        return self._R[j]

    def fine_positions(self, j: int) -> np.ndarray:
        """Positions of the nodes born on level ``j`` inside the level-``j`` vector."""
        nodes = self.h.level(j).interior_nodes
        if j == 0:
            return np.arange(len(nodes))
        born = np.asarray(self.h.birth_level)[nodes]
        return np.nonzero(born == j)[0]

    def nodal_restrict(self, u, j: int) -> np.ndarray:
        """``I_j`` of a level-``j+1`` function: its values at the level-``j`` nodes."""
        u = np.asarray(u, dtype=float)
        return u[self.coarse_positions(j)]

    def prolongate(self, u, j: int, k: int | None = None) -> np.ndarray:
        k = self.J if k is None else k
        return self.P_to(j, k) @ np.asarray(u, dtype=float)

    # ------------------------------------------------------------------
    # L2 projections
    def solve_mass(self, j: int, b) -> np.ndarray:
        M = self.fem.mass(j)
        if M.shape[0] == 0:
            return np.zeros(0)
        dinv = 1.0 / M.diagonal()
        x, rep = pcg(M, b, lambda r: dinv * r, tol=self.tol, maxit=self.maxit)
        if not rep.converged:
            raise SolverStall(f"mass solve on level {j} stalled at {rep.residual:.2e}")
        return x

    def l2_project(self, u, j: int, source: int | None = None) -> np.ndarray:
        """Exact L2 projection ``Q_j`` of a level-``source`` function (default ``J``)."""
        source = self.J if source is None else source
        self._check(j, source)
        if j > source:
            raise ValueError("target level must not exceed the source level")
        u = np.asarray(u, dtype=float)
        if j == source:
            return u.copy()
        rhs = self.P_to(j, source).T @ (self.fem.mass(source) @ u)
        return self.solve_mass(j, rhs)

    def approx_project(self, u, j: int, gamma: float) -> np.ndarray:
        """``Q_j^a`` of a level-``j+1`` function with relative L2 accuracy ``gamma``.

        ``gamma = 0`` gives the exact projection.  For ``gamma > 0`` a fixed
        number of Jacobi-Chebyshev steps on the mass system is used, enough
        to guarantee ``||(Q_j^a - Q_j) u|| <= gamma ||Q_j u||`` in L2.
        """
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if gamma == 0:
            return self.l2_project(u, j, source=j + 1)
        rhs = self.P(j).T @ (self.fem.mass(j + 1) @ np.asarray(u, dtype=float))
        return self.apply_approx_inverse(rhs, j, gamma)

    def apply_approx_inverse(self, b, j: int, gamma: float) -> np.ndarray:
        """The linear approximation of ``M_j^-1`` behind ``Q_j^a`` (exact when ``gamma = 0``)."""
        if gamma == 0:
            return self.solve_mass(j, b)
        M = self.fem.mass(j)
        if M.shape[0] == 0:
            return np.zeros(0)
        return chebyshev_solve(M, np.asarray(b, dtype=float), 1.0 / M.diagonal(), chebyshev_steps(gamma))

    def tilde_q_all(self, u, gamma: float, start: int | None = None) -> list[np.ndarray]:
        """``[Q~_0 u, ..., Q~_J u]`` for ``u`` on level ``start`` (default ``J``).

        Sweeps the product ``Q~_k = prod_{j=k}^{J-1} (I_j + Q_j^a (I_{j+1} - I_j))``
        from the right, so every level is visited once.
        """
        start = self.J if start is None else start
        v = np.asarray(u, dtype=float)
        out = [None] * (start + 1)
        out[start] = v.copy()
        for j in range(start - 1, -1, -1):
            coarse = self.nodal_restrict(v, j)
            osc = v - self.P(j) @ coarse
            v = coarse + self.approx_project(osc, j, gamma)
            out[j] = v
        return out

    def tilde_q(self, k: int, u, gamma: float) -> np.ndarray:
        self._check(k)
        return self.tilde_q_all(u, gamma)[k]

    def slices(self, u, gamma: float | None = None) -> list[np.ndarray]:
        """Level-``J`` vectors of ``(Q_j - Q_{j-1}) u``, or of the ``Q~`` slices if ``gamma`` is given."""
        if gamma is None:
            qs = [self.l2_project(u, j) for j in range(self.J + 1)]
        else:
            qs = self.tilde_q_all(u, gamma)
        full = [self.prolongate(q, j) for j, q in enumerate(qs)]
        return [full[0]] + [full[j] - full[j - 1] for j in range(1, len(full))]

    # ------------------------------------------------------------------
    def scaled_exponents(self, j: int) -> np.ndarray:
        return scaled_exponents(self.h, j)


def scaled_exponents(h: Hierarchy, j: int) -> np.ndarray:
    """``L_{j,i}``: least generation among the tets of ``T_j`` around each interior node."""
    lvl = h.level(j)
    best = np.full(lvl.num_vertices, np.iinfo(np.int64).max, dtype=np.int64)
    tv = h.tet_array(lvl.active_tets)
    lv = np.repeat(h.tet_levels(lvl.active_tets), 4)
    np.minimum.at(best, tv.ravel(), lv)
    return best[lvl.interior_nodes]


def vertex_exponents(h: Hierarchy, j: int) -> np.ndarray:
    """``L_{j,i}`` for every vertex of ``T_j`` (boundary included)."""
    lvl = h.level(j)
    best = np.full(lvl.num_vertices, np.iinfo(np.int64).max, dtype=np.int64)
    tv = h.tet_array(lvl.active_tets)
    np.minimum.at(best, tv.ravel(), np.repeat(h.tet_levels(lvl.active_tets), 4))
    return best


@dataclass
class DualBasisElement:
    """Linear polynomials biorthogonal to the (scaled) hats of one tet.

    ``coeffs[l, m]`` is the coefficient of the barycentric coordinate
    ``lambda_m`` in ``psi_l``.
    """

    tet: int
    coeffs: np.ndarray
    volume: float
    scale: np.ndarray


def element_mass(volume: float) -> np.ndarray:
    return volume / 20.0 * (np.ones((4, 4)) + np.eye(4))


def dual_basis(x, scale=None, tet: int = -1) -> DualBasisElement:
    """Dual polynomials on the tet with corners ``x`` (4, 3).

    ``scale`` holds the factors of the scaled hats (ones by default), so
    ``int phi_k scale_k psi_l = delta_kl``.
    """
    x = np.asarray(x, dtype=float)
    vol = abs(np.linalg.det(x[1:] - x[0])) / 6.0
    if not vol > 1e-300:
        raise DegenerateTet("zero-volume tet")
    s = np.ones(4) if scale is None else np.asarray(scale, dtype=float)
    # (S M C^T) = I  ->  C = S^-1 M^-1
    C = np.linalg.solve(element_mass(vol), np.diag(1.0 / s)).T
    return DualBasisElement(tet, C, vol, s)


def biorthogonality(elem: DualBasisElement) -> np.ndarray:
    """``[int phi_hat_k psi_l]_{k,l}`` from the exact element mass matrix."""
    return np.diag(elem.scale) @ element_mass(elem.volume) @ elem.coeffs.T


def level_dual_basis(h: Hierarchy, j: int, scaled: bool = True) -> dict[int, DualBasisElement]:
    """Dual basis on every tet of ``T_j``, against hats scaled by ``2^{3/2 L_{j,i}}``."""
    lvl = h.level(j)
    L = vertex_exponents(h, j)
    c = h.coords
    out = {}
    for t in lvl.active_tets:
        verts = list(h.tets[t].verts)
        s = 2.0 ** (1.5 * L[verts]) if scaled else None
        out[int(t)] = dual_basis(c[verts], s, int(t))
    return out


def global_dual(h: Hierarchy, j: int, node: int, duals=None) -> dict[int, np.ndarray]:
    """``M_i^{(j)}`` as per-tet barycentric coefficients: the star average of ``psi_i^tau``.

    Each tet in the star contributes its dual polynomial for ``node``
    weighted by ``1/E_i`` with ``E_i`` the number of tets in the star.
    """
    duals = level_dual_basis(h, j) if duals is None else duals
    star = sorted(h.star(node, j))
    E = len(star)
    out = {}
    for t in star:
        loc = h.tets[t].verts.index(node)
        out[t] = duals[t].coeffs[loc] / E
    return out


def star_counts(h: Hierarchy, j: int) -> np.ndarray:
    """``E_i``: number of tets of ``T_j`` around each vertex."""
    lvl = h.level(j)
    return np.bincount(h.tet_array(lvl.active_tets).ravel(), minlength=lvl.num_vertices)


__all__ = [
    "SolverStall", "Prolongation", "build_prolongation", "MultilevelTransfer",
    "scaled_exponents", "vertex_exponents", "DualBasisElement", "dual_basis",
    "biorthogonality", "level_dual_basis", "global_dual", "star_counts",
    "chebyshev_steps", "chebyshev_solve",
]
