"""Additive multilevel preconditioners: BPX, hierarchical basis (HB) and wavelet-modified HB (WHB).

All three act on a level-``J`` residual (load-type) vector ``r`` with entries
``(f, phi_i^{(J)})`` and return coefficients on ``S_J``:

``BPX``
    ``sum_j 2^j P_j D_j P_j^T r`` with ``D_j`` the indicator of the smoothing set.
``HB``
    same, with ``D_j`` restricted to the nodes born on level ``j``.
``WHB``
    same as HB but every fine hat ``phi_i^{(j)}`` is replaced by
    ``phi_i^{(j)} - Q_{j-1}^a phi_i^{(j)}``.

Level 0 is handled by an exact dense solve with ``A_0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .mesh import Hierarchy
from .transfer import MultilevelTransfer

DIM = 3
KINDS = ("bpx", "hb", "whb")


class ConfigError(ValueError):
    pass


def level_weight(j: int, d: int = DIM) -> float:
    """Diagonal scaling ``2^{j(d-2)}`` of the level-``j`` smoother."""
    return 2.0 ** (j * (d - 2))


@dataclass(frozen=True)
class SmoothingSet:
    """Nodes smoothed on level ``j``: new nodes plus old nodes whose hat changed."""

    level: int
    nodes: np.ndarray
    new_nodes: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def smoothing_set(h: Hierarchy, j: int) -> SmoothingSet:
    """``N~_j``: nodes born on level ``j`` plus old nodes whose hat changed.

    New vertices are always edge midpoints, and an old hat differs from its
    level-``j`` counterpart exactly when it is nonzero at some new vertex,
    i.e. when one of the node's own edges was bisected.
    """
    lvl = h.level(j)
    if j == 0:
        return SmoothingSet(0, lvl.interior_nodes.copy(), lvl.interior_nodes.copy())
    prev = h.level(j - 1)
    new = h.new_nodes(j)
    ends = [p for v in range(prev.num_vertices, lvl.num_vertices) for p in h.midpoint_parents[v]]
    changed = np.intersect1d(np.asarray(ends, dtype=np.int64), prev.interior_nodes)
    return SmoothingSet(j, np.union1d(new, changed), new)


def smoothing_counts(h: Hierarchy) -> list[int]:
    return [len(smoothing_set(h, j)) for j in range(h.J + 1)]


def smoothing_bound_holds(h: Hierarchy) -> tuple[bool, int, int]:
    """``3 sum |N~_j| <= 5 N_J - 2 N_0`` in exact integers; returns (ok, lhs, rhs)."""
    lhs = 3 * sum(smoothing_counts(h))
    rhs = 5 * h.level(h.J).num_dofs - 2 * h.level(0).num_dofs
    return lhs <= rhs, lhs, rhs


@dataclass
class PreconditionerConfig:
    """Choice of preconditioner.

    Parameters
    ----------
    kind : {"bpx", "hb", "whb"}
    gamma : float
        Projection tolerance of WHB; ignored otherwise.
    gamma_max : float
        Upper limit (exclusive) accepted for ``gamma``.
    smoother : {"scaled", "jacobi"}
        ``2^j`` scaling or the inverse diagonal of ``A_j`` on the smoothed nodes.
    """

    kind: str = "bpx"
    gamma: float = 0.0
    gamma_max: float = 1.0
    smoother: str = "scaled"

    def __post_init__(self):
        self.kind = str(self.kind).lower()
        if self.kind not in KINDS:
            raise ConfigError(f"unknown preconditioner {self.kind!r}; choose from {KINDS}")
        if not 0 <= self.gamma < self.gamma_max:
            raise ConfigError(f"gamma={self.gamma} outside [0, {self.gamma_max})")
        if self.smoother not in ("scaled", "jacobi"):
            raise ConfigError(f"unknown smoother {self.smoother!r}")


class MultilevelPreconditioner:
    """Symmetric additive preconditioner on the finest level of a transfer hierarchy."""

    def __init__(self, transfer: MultilevelTransfer, config: PreconditionerConfig | None = None):
        self.t = transfer
        self.config = config or PreconditionerConfig()
        self.J = transfer.J
        fem = transfer.fem
        A0 = fem.stiffness(0).toarray()
        self._coarse = scipy.linalg.cho_factor(A0) if len(A0) else None
        self.masks = []
        self.weights = []
        for j in range(self.J + 1):
            pos = self._positions(j)
            if self.config.smoother == "jacobi":
                w = 1.0 / fem.stiffness(j).diagonal()[pos]
            else:
                w = np.full(len(pos), level_weight(j))
            self.masks.append(pos)
            self.weights.append(w)

    def _positions(self, j: int) -> np.ndarray:
        h = self.t.h
        if self.config.kind == "bpx":
            nodes = h.level(j).interior_nodes
            return np.searchsorted(nodes, smoothing_set(h, j).nodes)
        return self.t.fine_positions(j)

    def coarse_solve(self, r0: np.ndarray) -> np.ndarray:
        if self._coarse is None:
            return np.zeros(0)
        return scipy.linalg.cho_solve(self._coarse, r0)

    def _wavelet_adjoint(self, rj: np.ndarray, j: int) -> np.ndarray:
        """``(I - M_j P C P^T) r`` where ``C`` approximates ``M_{j-1}^-1``."""
        t, g = self.t, self.config.gamma
        P = t.P(j - 1)
        return rj - t.fem.mass(j) @ (P @ t.apply_approx_inverse(P.T @ rj, j - 1, g))

    def _wavelet(self, yj: np.ndarray, j: int) -> np.ndarray:
        """``(I - P C P^T M_j) y``."""
        t, g = self.t, self.config.gamma
        P = t.P(j - 1)
        return yj - P @ t.apply_approx_inverse(P.T @ (t.fem.mass(j) @ yj), j - 1, g)

    def apply(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t, whb = self.t, self.config.kind == "whb"
        res = [None] * (self.J + 1)
        res[self.J] = r
        for j in range(self.J - 1, -1, -1):
            res[j] = t.P(j).T @ res[j + 1]
        y = self.coarse_solve(res[0])
        for j in range(1, self.J + 1):
            rj = self._wavelet_adjoint(res[j], j) if whb else res[j]
            z = np.zeros_like(rj)
            pos = self.masks[j]
            z[pos] = self.weights[j] * rj[pos]
            if whb:
                z = self._wavelet(z, j)
            y = t.P(j - 1) @ y + z
        return y

    __call__ = apply


def make_preconditioner(transfer: MultilevelTransfer, kind: str = "bpx", gamma: float = 0.0, **kw):
    return MultilevelPreconditioner(transfer, PreconditionerConfig(kind, gamma, **kw))


def bpx_apply(transfer: MultilevelTransfer, r) -> np.ndarray:
    return make_preconditioner(transfer, "bpx").apply(r)


def hb_apply(transfer: MultilevelTransfer, r) -> np.ndarray:
    return make_preconditioner(transfer, "hb").apply(r)


def whb_apply(transfer: MultilevelTransfer, r, gamma: float = 0.0) -> np.ndarray:
    return make_preconditioner(transfer, "whb", gamma).apply(r)
