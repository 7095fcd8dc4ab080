"""Times the numpy and numba builds of the three hot kernels.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 500,2000 --repeats 7

Reports the best-of-N wall time per backend and the speedup. The numba
column degrades to "n/a" when numba is not importable. The first numba
call of each kernel is excluded from timing (compilation warm-up).
"""

import argparse
import timeit

import numpy as np

from driftgce import kernels


def best_of(fn, repeats):
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def bench_pairwise(n, rng, repeats):
    a = rng.random((n, 2))
    b = rng.random((n, 2))
    return (
        best_of(lambda: kernels.pairwise_dists_numpy(a, b), repeats),
        best_of(lambda: kernels.pairwise_dists_numba(a, b), repeats),
    )


def bench_kde(n, rng, repeats):
    queries = rng.random((n, 2))
    data = rng.random((n, 2))
    return (
        best_of(lambda: kernels.kde_log_density_numpy(queries, data, 0.1), repeats),
        best_of(lambda: kernels.kde_log_density_numba(queries, data, 0.1), repeats),
    )


def bench_merge(n, rng, repeats):
    # merge cost grows ~n^3, keep the instance count moderate
    m = min(n, 600)
    pts = rng.random((m, 2))
    vecs = rng.standard_normal((m, 2))
    return (
        best_of(lambda: kernels.glance_merge_numpy(pts, vecs, 4), repeats),
        best_of(lambda: kernels.glance_merge_numba(pts, vecs, 4), repeats),
    )


BENCHES = [
    ("pairwise_dists", bench_pairwise),
    ("kde_log_density", bench_kde),
    ("glance_merge", bench_merge),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="200,1000,3000", help="comma-separated point counts")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best is kept")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if kernels.HAS_NUMBA:
        warm = np.random.default_rng(0).random((8, 2))
        kernels.pairwise_dists_numba(warm, warm)
        kernels.kde_log_density_numba(warm, warm, 0.1)
        kernels.glance_merge_numba(warm, warm, 2)
    else:
        print("numba unavailable, numba columns will read n/a")

    print(f"{'kernel':<17}{'n':>6}{'numpy [ms]':>13}{'numba [ms]':>13}{'speedup':>9}")
    rng = np.random.default_rng(42)
    for name, bench in BENCHES:
        for n in sizes:
            t_np, t_nb = bench(n, rng, args.repeats)
            if kernels.HAS_NUMBA:
                print(
                    f"{name:<17}{n:>6}{t_np * 1e3:>13.3f}{t_nb * 1e3:>13.3f}"
                    f"{t_np / t_nb:>8.1f}x"
                )
            else:
                print(f"{name:<17}{n:>6}{t_np * 1e3:>13.3f}{'n/a':>13}{'n/a':>9}")


if __name__ == "__main__":
    main()
