"""Time the compiled element kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 35 70 140] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gelflow import kernels
from gelflow.fem import _tables
from gelflow.mesh import gen_rect_mesh


def cases(mesh):
    rule, phi1, _, dphi2 = _tables()
    x, t = mesh.vertices, mesh.triangles
    return {
        "p2_stiffness": lambda impl: kernels.p2_stiffness(x, t, rule.weights, dphi2, impl=impl),
        "p2p1_divergence": lambda impl: kernels.p2p1_divergence(x, t, rule.weights, dphi2, phi1, impl=impl),
        "p1_mass": lambda impl: kernels.p1_mass(x, t, impl=impl),
        "p1_stiffness": lambda impl: kernels.p1_stiffness(x, t, impl=impl),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[35, 70, 140])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled kernels not available; timing the numpy fallback only")
    names = list(impls)
    print(f"{'kernel':<16} {'cells':>7} " + " ".join(f"{n + ' [ms]':>12}" for n in names) + f" {'speedup':>8}")
    for n in args.sizes:
        mesh = gen_rect_mesh(n, n)
        for name, fn in cases(mesh).items():
            ref = fn(impls["numpy"])
            best = {}
            for k, impl in impls.items():
                assert np.allclose(fn(impl), ref, rtol=1e-12, atol=1e-12), (name, k)
                best[k] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) * 1e3
            speed = best["numpy"] / best["cython"] if "cython" in best else float("nan")
            print(f"{name:<16} {mesh.n_triangles:>7} " + " ".join(f"{best[k]:>12.2f}" for k in names)
                  + f" {speed:>7.1f}x")


if __name__ == "__main__":
    main()
