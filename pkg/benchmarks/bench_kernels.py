"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once before timing so JIT compilation is excluded.
Both implementations get identical inputs; the largest output difference is
printed next to the timings.
"""
import argparse
import time

import numpy as np

from rckelly import kernels
from rckelly._accel import HAVE_NUMBA


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_project(rng, repeat):
    Z = rng.normal(size=(2000, 20))

    def run(impl):
        return lambda: [impl(z, 1e-6) for z in Z]

    out_nb = np.array([kernels.project_numba(z, 1e-6)[0] for z in Z])
    out_np = np.array([kernels.project_numpy(z, 1e-6)[0] for z in Z])
    diff = np.abs(out_nb - out_np).max()
    return "project x2000 (n=20)", best_of(run(kernels.project_numba), repeat), best_of(run(kernels.project_numpy), repeat), diff


def bench_sgd(rng, repeat):
    n, batch, m = 20, 100, 100
    samples = np.exp(rng.normal(0.0, 0.1, size=(m, batch, n)))
    samples[:, :, -1] = 1.0

    def run(impl):
        def go():
            b = np.full(n, 1.0 / n)
            acc_b, acc = np.zeros(n), np.zeros(2)
            impl(samples, b, 0.0, 1, 1.0, 6.456, 1e-6, 100.0, True, acc_b, acc)
            return acc_b / acc[0]

        return go

    diff = np.abs(run(kernels.sgd_chunk_numba)() - run(kernels.sgd_chunk_numpy)()).max()
    return "sgd_chunk 100 iters x 100 (n=20)", best_of(run(kernels.sgd_chunk_numba), repeat), best_of(run(kernels.sgd_chunk_numpy), repeat), diff


def bench_wealth(rng, repeat):
    rb = np.exp(rng.normal(0.01, 0.1, size=(10_000, 99)))
    diff = np.abs(kernels.wealth_paths_numba(rb)[0] - kernels.wealth_paths_numpy(rb)[0]).max()
    return (
        "wealth_paths 10^4 x 99",
        best_of(lambda: kernels.wealth_paths_numba(rb), repeat),
        best_of(lambda: kernels.wealth_paths_numpy(rb), repeat),
        diff,
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':36s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for bench in (bench_project, bench_sgd, bench_wealth):
        name, t_nb, t_np, diff = bench(rng, args.repeat)
        print(f"{name:36s} {1e3 * t_nb:10.2f} {1e3 * t_np:10.2f} {t_np / t_nb:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
