"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gexprisk import _kernels_py

try:
    from gexprisk import _kernels as _compiled
except ImportError:
    _compiled = None


def workloads(mod, rng):
    dW = rng.standard_normal((4096, 100)) * 0.1
    return {
        "euler_affine 4096x100": lambda: mod.euler_affine(0.0, np.full(100, 0.01), dW, 0.1, -0.5, 0.2, 0.0),
        "golden_min_gbar x200": lambda: [mod.golden_min_gbar(mod.CASE1, 0.5, 0.3, -5.0, 5.0, 1e-12, 400)
                                         for _ in range(200)],
        "reduced_objective x20000": lambda: [mod.reduced_objective(mod.CASE3, 2.0, 0.4, u)
                                             for u in np.linspace(-3, 3, 20000)],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mods = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    results = {}
    for name, mod in mods:
        for label, fn in workloads(mod, np.random.default_rng(0)).items():
            results.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"{'workload':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, t in results.items():
        py, cy = t["python"], t.get("cython")
        if cy is None:
            print(f"{label:28s} {py * 1e3:12.3f} {'n/a':>12s} {'n/a':>8s}")
        else:
            print(f"{label:28s} {py * 1e3:12.3f} {cy * 1e3:12.3f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
