"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np

_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def p1_geometry(coords, tets):
    """Volumes ``(m,)`` and barycentric gradients ``(m, 4, 3)`` of P1 tets."""
    p = coords[tets]
    e = p[:, 1:, :] - p[:, :1, :]  # edge vectors x_k - x_0
    adj = np.stack([np.cross(e[:, 1], e[:, 2]), np.cross(e[:, 2], e[:, 0]), np.cross(e[:, 0], e[:, 1])], axis=1)
    det = np.einsum("mb,mb->m", e[:, 0], adj[:, 0])
    vol = det / 6.0
    # rows are gradients of lambda_1..lambda_3; a flat tet gives inf/nan like the compiled kernel
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = adj / det[:, None, None]
        grads = np.empty((len(tets), 4, 3))
        grads[:, 1:, :] = inv
        grads[:, 0, :] = -inv.sum(axis=1)
    return vol, grads


def assemble_coo(coords, tets, pmat, q):
    """COO triplets of P1 stiffness and mass for per-tet constant ``p`` (m,3,3) and ``q`` (m,)."""
    vol, g = p1_geometry(coords, tets)
    avol = np.abs(vol)
    k = np.einsum("mia,mab,mjb->mij", g, pmat, g) * avol[:, None, None]
    base = (np.ones((4, 4)) + np.eye(4)) / 20.0
    m = (avol * q)[:, None, None] * base[None]
    rows = np.repeat(tets, 4, axis=1).ravel()
    cols = np.tile(tets, (1, 4)).ravel()
    return rows, cols, k.ravel(), m.ravel()


def pair_scan(tets, levels, diam, nverts):
    """Scan every pair of tets sharing a vertex.

    Returns ``(maxdiff, witness, ratio, ratio_witness)`` where ``maxdiff[s]``
    is the largest level difference among pairs sharing exactly ``s``
    vertices (s = 1, 2, 3), ``witness[s]`` one such pair, and ``ratio`` the
    largest diameter ratio over all touching pairs.
    """
    m = len(tets)
    order = np.argsort(tets.ravel(), kind="stable")
    owner = order // 4
    verts = tets.ravel()[order]
    starts = np.searchsorted(verts, np.arange(nverts + 1))
    pa, pb = [], []
    for v in range(nverts):
        star = owner[starts[v]:starts[v + 1]]
        if len(star) < 2:
            continue
        i, k = np.triu_indices(len(star), 1)
        a, b = star[i], star[k]
        pa.append(np.minimum(a, b))
        pb.append(np.maximum(a, b))
    maxdiff = np.zeros(4, dtype=np.int64)
    witness = -np.ones((4, 2), dtype=np.int64)
    if not pa:
        return maxdiff, witness, 1.0, (-1, -1)
    key = np.concatenate(pa).astype(np.int64) * m + np.concatenate(pb)
    uniq, shared = np.unique(key, return_counts=True)
    a, b = uniq // m, uniq % m
    diff = np.abs(levels[a] - levels[b])
    for s in (1, 2, 3):
        sel = np.nonzero(shared == s)[0]
        if len(sel):
            best = sel[np.argmax(diff[sel])]
            maxdiff[s] = diff[best]
            witness[s] = (a[best], b[best])
    r = np.maximum(diam[a] / diam[b], diam[b] / diam[a])
    best = int(np.argmax(r))
    return maxdiff, witness, float(r[best]), (int(a[best]), int(b[best]))
