"""Time the compiled element kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--segments 400] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gpvortex import _kernels_py
from gpvortex.field import triangle_rule
from gpvortex.mesh import make_ellipse_mesh, refine_uniform

try:
    from gpvortex import _kernels as _compiled
except ImportError:
    _compiled = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--segments", type=int, default=400)
    ap.add_argument("--refine", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    m = refine_uniform(make_ellipse_mesh(5.0, 5.0, args.segments), args.refine)
    tris = np.ascontiguousarray(m.triangles, dtype=np.int64)
    bary = np.ascontiguousarray(triangle_rule(4)[0])
    rng = np.random.default_rng(0)
    vals = rng.normal(size=m.n_vertices)
    re, im = rng.normal(size=(2, m.n_vertices))
    coef = rng.normal(size=(m.n_triangles, len(bary)))
    cases = {
        "eval_at_qp": lambda k: k.eval_at_qp(tris, bary, vals),
        "scatter_load": lambda k: k.scatter_load(tris, bary, coef, m.n_vertices),
        "weighted_mass_local": lambda k: k.weighted_mass_local(tris, bary, coef),
        "triangle_winding": lambda k: k.triangle_winding(tris, re, im),
    }
    print(f"mesh: {m.n_vertices} vertices, {m.n_triangles} triangles")
    print(f"{'kernel':22s} {'numpy [ms]':>11s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _compiled is None:
            print(f"{name:22s} {t_py:11.2f} {'n/a':>14s} {'n/a':>8s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:22s} {t_py:11.2f} {t_c:14.2f} {t_py / t_c:8.2f}")


if __name__ == "__main__":
    main()
