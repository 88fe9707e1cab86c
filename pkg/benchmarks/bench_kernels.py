"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--cloud 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from qclab import _kernels_py

try:
    from qclab import _kernels
except ImportError:
    _kernels = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cloud", type=int, default=20_000)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    gen = np.random.default_rng(args.seed)
    cloud = np.ascontiguousarray(gen.uniform(-1, 1, (args.cloud, args.dim)))
    z = np.ascontiguousarray(gen.standard_normal((args.cloud, 2)))
    norms = np.linalg.norm(z, axis=1)
    order = np.argsort(-norms)
    z, norms = np.ascontiguousarray(z[order]), np.ascontiguousarray(norms[order])
    a = 2 * np.pi * np.arange(2000) / 2000
    dirs = np.ascontiguousarray(np.stack([np.cos(a), np.sin(a)], 1))
    cases = [
        (f"traversal p=2 t=0.1 ({args.cloud} pts)", lambda m: m.farthest_point_traversal(cloud, 2.0, 0.1, 10 ** 6)),
        (f"traversal p=0.5 t=0.3 ({args.cloud} pts)", lambda m: m.farthest_point_traversal(cloud, 0.5, 0.3, 10 ** 6)),
        (f"cone hit 2000 dirs ({args.cloud} pts)", lambda m: m.cone_first_hit(z, norms, dirs, np.cos(0.05))),
    ]
    print(f"{'case':45s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, run in cases:
        tp = best_time(lambda: run(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:45s} {tp:11.4f} {'':>11s} {'':>8s}")
            continue
        tc = best_time(lambda: run(_kernels), args.repeat)
        print(f"{name:45s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
