"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--J 4] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from redgreen import kernels
from redgreen.mesh import build_initial_mesh, tet_diameters
from redgreen.refine import refine_scenario


def level_arrays(J):
    h = build_initial_mesh("cube")
    refine_scenario(h, "uniform", J)
    lvl = h.level(J)
    tv = np.ascontiguousarray(h.tet_array(lvl.active_tets))
    coords = np.ascontiguousarray(h.coords[: lvl.num_vertices])
    levels = np.ascontiguousarray(h.tet_levels(lvl.active_tets))
    diam = np.ascontiguousarray(tet_diameters(coords, tv))
    return coords, tv, levels, diam


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=4, help="uniform refinement depth of the test mesh")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    coords, tv, levels, diam = level_arrays(args.J)
    m = len(tv)
    pmat = np.ascontiguousarray(np.broadcast_to(np.eye(3), (m, 3, 3)))
    q = np.ones(m)
    jobs = {
        "p1_geometry": lambda k: k.p1_geometry(coords, tv),
        "assemble_coo": lambda k: k.assemble_coo(coords, tv, pmat, q),
        "pair_scan": lambda k: k.pair_scan(tv, levels, diam, len(coords)),
    }
    impls = kernels.backends()
    print(f"uniform cube J={args.J}: {m} tets, {len(coords)} vertices; best of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for name, job in jobs.items():
        times = {b: min(timeit.repeat(lambda: job(k), number=1, repeat=args.repeat)) for b, k in impls.items()}
        row = f"{name:<14}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
