import os
import subprocess
import sys

import numpy as np
import pytest

from redgreen import kernels
from redgreen.mesh import tet_diameters

BACKENDS = kernels.backends()


def _level_arrays(h, j):
    ids = h.level(j).active_tets
    tv = np.ascontiguousarray(h.tet_array(ids))
    lv = np.ascontiguousarray(h.tet_levels(ids))
    return tv, lv, np.ascontiguousarray(tet_diameters(h.coords, tv))


def test_compiled_backend_built():
    # the sdist ships the .pyx; an editable install compiles it
    assert "compiled" in BACKENDS
    assert kernels.BACKEND == ("python" if os.environ.get("REDGREEN_PURE_PYTHON") else "compiled")


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
@pytest.mark.parametrize("scenario", ["uniform", "corner", "ball"])
def test_backends_agree_on_assembly(hier, scenario):
    h = hier(scenario, 3)
    tv, _, _ = _level_arrays(h, 3)
    c = np.ascontiguousarray(h.coords)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(len(tv), 3, 3))
    pmat = np.ascontiguousarray(A @ A.transpose(0, 2, 1) + np.eye(3))
    q = np.ascontiguousarray(rng.uniform(0, 2, len(tv)))
    py, cy = BACKENDS["python"], BACKENDS["compiled"]
    v0, g0 = py.p1_geometry(c, tv)
    v1, g1 = cy.p1_geometry(c, tv)
    np.testing.assert_allclose(v1, v0, rtol=1e-13)
    np.testing.assert_allclose(g1, g0, rtol=1e-11, atol=1e-11 * np.abs(g0).max())
    for a, b in zip(py.assemble_coo(c, tv, pmat, q), cy.assemble_coo(c, tv, pmat, q)):
        np.testing.assert_allclose(b, a, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_flat_tet_gives_zero_volume_not_an_error(name):
    # callers rely on vol == 0 to raise DegenerateTet
    flat = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], dtype=float)
    vol, g = BACKENDS[name].p1_geometry(flat, np.arange(4, dtype=np.int64).reshape(1, 4))
    assert vol[0] == 0.0
    assert not np.isfinite(g).all()


@pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
@pytest.mark.parametrize("scenario", ["uniform", "corner", "ball"])
def test_backends_agree_on_pair_scan(hier, scenario):
    h = hier(scenario, 3)
    for j in range(h.J + 1):
        tv, lv, d = _level_arrays(h, j)
        n = h.level(j).num_vertices
        md0, w0, r0, _ = BACKENDS["python"].pair_scan(tv, lv, d, n)
        md1, w1, r1, _ = BACKENDS["compiled"].pair_scan(tv, lv, d, n)
        np.testing.assert_array_equal(np.asarray(md1), md0)
        assert r1 == pytest.approx(r0, rel=1e-15)
        w1 = np.asarray(w1)
        for s in (1, 2, 3):
            if w1[s, 0] >= 0:
                a, b = w1[s]
                assert len(set(tv[a]) & set(tv[b])) == s
                assert abs(lv[a] - lv[b]) == md1[s]


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, REDGREEN_PURE_PYTHON="1")
    code = "from redgreen import kernels; print(kernels.BACKEND)"
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert r.stdout.strip() == "python"
