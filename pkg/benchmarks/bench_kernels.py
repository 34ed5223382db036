#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from geopriv._kernels import _ref

try:
    from geopriv._kernels import _fast
except ImportError:
    _fast = None

INV_E = math.exp(-1.0)


def timeit(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)
    ys = -np.exp(rng.uniform(math.log(1e-16), math.log(INV_E * (1 - 1e-9)), 1_000_000))
    ps = rng.random(1_000_000)
    n_pts = 5000
    px = rng.uniform(0, 30_000, n_pts)
    py = rng.uniform(0, 30_000, n_pts)
    w = rng.dirichlet(np.ones(n_pts))
    m = 2000
    cx = rng.uniform(0, 30_000, m)
    cy = rng.uniform(0, 30_000, m)
    logp = np.log(rng.dirichlet(np.ones(m)))
    zx = rng.uniform(0, 30_000, 500)
    zy = rng.uniform(0, 30_000, 500)
    x0, y0 = float((px * w).sum()), float((py * w).sum())
    return {
        "lambert_wm1_array (1e6)": lambda mod: mod.lambert_wm1_array(ys),
        "laplace_radii (1e6)": lambda mod: mod.laplace_radii(0.004, ps),
        "weiszfeld (5000 pts)": lambda mod: mod.weiszfeld(px, py, w, x0, y0, 1e-4, 200),
        "remap_batch (500 x 2000)": lambda mod: mod.remap_batch(
            cx, cy, logp, 0.002, zx, zy, 1e-3, 200
        ),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = [("python", _ref)]
    if _fast is not None:
        backends.append(("c", _fast))
    else:
        print("compiled extension not available; benchmarking the fallback only")

    print(f"{'workload':<28} " + " ".join(f"{name:>12}" for name, _ in backends) + "  speedup")
    for label, work in workloads().items():
        times = [timeit(lambda mod=mod: work(mod), args.repeat) for _, mod in backends]
        cells = " ".join(f"{t * 1e3:>10.1f}ms" for t in times)
        speedup = f"{times[0] / times[-1]:>7.1f}x" if len(times) > 1 else ""
        print(f"{label:<28} {cells}  {speedup}")


if __name__ == "__main__":
    main()
