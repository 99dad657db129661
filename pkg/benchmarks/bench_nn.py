"""Compiled vs numpy kernels: grid NN search, brute force, polygon membership.

    python3 benchmarks/bench_nn.py [--sizes 2000 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from tbmanifold import kernels
from tbmanifold.synth import ManifoldSpec, generate_dataset, sample_true_manifold


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 20000])
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    names = sorted(kernels.BACKENDS)
    print(f"backends: {', '.join(names)} (default {kernels.BACKEND_NAME})")
    print(f"{'case':<28}{'m':>8}" + "".join(f"{n:>12}" for n in names) + f"{'equal':>8}")
    for dataset in ("spiral", "swissroll"):
        spec = ManifoldSpec.preset(dataset)
        for m in a.sizes:
            U = sample_true_manifold(spec, m, 1).points
            V = generate_dataset(spec, m, 2).points
            res = {n: best_of(lambda n=n: kernels.nn_sq_dists(V, U, impl=kernels.BACKENDS[n]),
                              a.repeat) for n in names}
            same = all(np.array_equal(res[names[0]][1], r[1]) for r in res.values())
            print(f"{'grid ' + dataset:<28}{m:>8}" + "".join(f"{res[n][0]:>12.4f}" for n in names)
                  + f"{str(same):>8}")
        m = min(a.sizes)
        U = sample_true_manifold(spec, m, 1).points
        V = generate_dataset(spec, m, 2).points
        res = {n: best_of(lambda n=n: kernels.brute_nn_sq_dists(V, U, impl=kernels.BACKENDS[n]),
                          a.repeat) for n in names}
        same = all(np.array_equal(res[names[0]][1], r[1]) for r in res.values())
        print(f"{'brute ' + dataset:<28}{m:>8}" + "".join(f"{res[n][0]:>12.4f}" for n in names)
              + f"{str(same):>8}")
    rng = np.random.default_rng(0)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 40))
    poly = np.c_[np.cos(ang), np.sin(ang)]
    pts = rng.uniform(-1.2, 1.2, (max(a.sizes) * 10, 2))
    res = {n: best_of(lambda n=n: kernels.in_convex_polygon(poly, pts, impl=kernels.BACKENDS[n]),
                      a.repeat) for n in names}
    same = all(np.array_equal(res[names[0]][1], r[1]) for r in res.values())
    print(f"{'polygon (40 vertices)':<28}{len(pts):>8}" + "".join(f"{res[n][0]:>12.4f}" for n in names)
          + f"{str(same):>8}")


if __name__ == "__main__":
    main()
