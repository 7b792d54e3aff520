# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: P1 element assembly and the touching-pair scan."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _det3(double[:, :] j) nogil:
    return (j[0, 0] * (j[1, 1] * j[2, 2] - j[1, 2] * j[2, 1])
            - j[0, 1] * (j[1, 0] * j[2, 2] - j[1, 2] * j[2, 0])
            + j[0, 2] * (j[1, 0] * j[2, 1] - j[1, 1] * j[2, 0]))


def p1_geometry(double[:, ::1] coords, cnp.int64_t[:, ::1] tets):
    cdef Py_ssize_t m = tets.shape[0], t, a, b
    vol_arr = np.empty(m)
    grads_arr = np.empty((m, 4, 3))
    cdef double[::1] vol = vol_arr
    cdef double[:, :, ::1] g = grads_arr
    cdef double[:, :] jac = np.empty((3, 3))
    cdef double det, inv[3][3]
    with nogil:
        for t in range(m):
            # jac columns are edge vectors x_k - x_0
            for a in range(3):
                for b in range(3):
                    jac[b, a] = coords[tets[t, a + 1], b] - coords[tets[t, 0], b]
            det = _det3(jac)
            vol[t] = det / 6.0
            inv[0][0] = (jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1]) / det
            inv[0][1] = (jac[0, 2] * jac[2, 1] - jac[0, 1] * jac[2, 2]) / det
            inv[0][2] = (jac[0, 1] * jac[1, 2] - jac[0, 2] * jac[1, 1]) / det
            inv[1][0] = (jac[1, 2] * jac[2, 0] - jac[1, 0] * jac[2, 2]) / det
            inv[1][1] = (jac[0, 0] * jac[2, 2] - jac[0, 2] * jac[2, 0]) / det
            inv[1][2] = (jac[0, 2] * jac[1, 0] - jac[0, 0] * jac[1, 2]) / det
            inv[2][0] = (jac[1, 0] * jac[2, 1] - jac[1, 1] * jac[2, 0]) / det
            inv[2][1] = (jac[0, 1] * jac[2, 0] - jac[0, 0] * jac[2, 1]) / det
            inv[2][2] = (jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]) / det
            for b in range(3):
                g[t, 0, b] = -(inv[0][b] + inv[1][b] + inv[2][b])
                for a in range(3):
                    g[t, a + 1, b] = inv[a][b]
    return vol_arr, grads_arr


def assemble_coo(double[:, ::1] coords, cnp.int64_t[:, ::1] tets,
                 double[:, :, ::1] pmat, double[::1] q):
    cdef Py_ssize_t m = tets.shape[0], t, i, k, a, b, n
    vol_arr, g_arr = p1_geometry(coords, tets)
    cdef double[::1] vol = vol_arr
    cdef double[:, :, ::1] g = g_arr
    rows_arr = np.empty(16 * m, dtype=np.int64)
    cols_arr = np.empty(16 * m, dtype=np.int64)
    kv_arr = np.empty(16 * m)
    mv_arr = np.empty(16 * m)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef double[::1] kv = kv_arr
    cdef double[::1] mv = mv_arr
    cdef double av, s, pg[3]
    with nogil:
        for t in range(m):
            av = fabs(vol[t])
            for i in range(4):
                for a in range(3):
                    pg[a] = 0.0
                    for b in range(3):
                        pg[a] += pmat[t, a, b] * g[t, i, b]
                for k in range(4):
                    n = 16 * t + 4 * i + k
                    rows[n] = tets[t, i]
                    cols[n] = tets[t, k]
                    s = 0.0
                    for a in range(3):
                        s += pg[a] * g[t, k, a]
                    kv[n] = s * av
                    mv[n] = av * q[t] * (2.0 if i == k else 1.0) / 20.0
    return rows_arr, cols_arr, kv_arr, mv_arr


cdef inline bint _better(long d, long best, long a, long b, long wa, long wb) nogil:
    if d > best:
        return True
    return d == best and (wa < 0 or a < wa or (a == wa and b < wb))


def pair_scan(cnp.int64_t[:, ::1] tets, cnp.int64_t[::1] levels, double[::1] diam, Py_ssize_t nverts):
    cdef Py_ssize_t m = tets.shape[0], t, i, k, v, a, b, p, q
    # vertex -> tet incidence in CSR form
    counts = np.zeros(nverts + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] start = counts
    for t in range(m):
        for i in range(4):
            start[tets[t, i] + 1] += 1
    for v in range(nverts):
        start[v + 1] += start[v]
    fill_arr = np.array(counts[:-1], copy=True)
    cdef cnp.int64_t[::1] fill = fill_arr
    star_arr = np.empty(4 * m, dtype=np.int64)
    cdef cnp.int64_t[::1] star = star_arr
    for t in range(m):
        for i in range(4):
            v = tets[t, i]
            star[fill[v]] = t
            fill[v] += 1
    stamp_arr = -np.ones(m, dtype=np.int64)
    cdef cnp.int64_t[::1] stamp = stamp_arr
    maxdiff = np.zeros(4, dtype=np.int64)
    witness = -np.ones((4, 2), dtype=np.int64)
    cdef cnp.int64_t[::1] md = maxdiff
    cdef cnp.int64_t[:, ::1] wt = witness
    cdef long shared, d
    cdef double r, best_r = 1.0
    cdef long ra = -1, rb = -1
    with nogil:
        for a in range(m):
            for i in range(4):
                v = tets[a, i]
                for p in range(start[v], start[v + 1]):
                    b = star[p]
                    if b <= a or stamp[b] == a:
                        continue
                    stamp[b] = a
                    shared = 0
                    for k in range(4):
                        for q in range(4):
                            if tets[a, k] == tets[b, q]:
                                shared += 1
                    d = levels[a] - levels[b]
                    if d < 0:
                        d = -d
                    if _better(d, md[shared], a, b, wt[shared, 0], wt[shared, 1]):
                        md[shared] = d
                        wt[shared, 0] = a
                        wt[shared, 1] = b
                    r = diam[a] / diam[b]
                    if diam[b] / diam[a] > r:
                        r = diam[b] / diam[a]
                    if ra < 0 or r > best_r or (r == best_r and (a < ra or (a == ra and b < rb))):
                        best_r = r
                        ra = a
                        rb = b
    return maxdiff, witness, best_r, (ra, rb)
