"""Benchmark the compiled kernels against the pure-NumPy fallback.

Covers the two hot paths: mutual-information scoring of candidate bodies
and the triplet loss/gradient used by every fit iteration.

Run:  python3 benchmarks/bench_kernels.py
"""

import itertools
import time

import numpy as np

from tuplelearn._kernels import available_backends


def time_call(fn, *args, repeat=5, min_seconds=0.2):
    # Calibrate an iteration count, then report the best of `repeat` runs.
    fn(*args)
    start = time.perf_counter()
    fn(*args)
    once = time.perf_counter() - start
    iters = max(1, int(min_seconds / max(once, 1e-9)))
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for _ in range(iters):
            fn(*args)
        best = min(best, (time.perf_counter() - start) / iters)
    return best


def perm_table(n):
    return np.ascontiguousarray(list(itertools.permutations(range(n))), dtype=np.int64)


def bench_mi(backends):
    rng = np.random.default_rng(0)
    print("\nmi_from_samples (per candidate scoring call)")
    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for tuple_size, n_f in ((3, 10), (5, 10), (5, 100), (8, 50)):
        n_body = tuple_size - 1
        samples = np.ascontiguousarray(rng.normal(1.5, 0.5, size=(n_f, n_body)))
        perms = perm_table(n_body)
        times = {
            name: time_call(mod.mi_from_samples, samples, 0.5, perms)
            for name, mod in backends.items()
        }
        label = f"k={tuple_size}, n_f={n_f}"
        row = f"{label:<28}" + "".join(f"{times[name] * 1e6:>10.1f}us" for name in backends)
        if len(times) > 1:
            row += f"{times['pure'] / times['native']:>9.1f}x"
        print(row)


def bench_loss(backends):
    rng = np.random.default_rng(1)
    print("\nloss_and_grad (per fit iteration)")
    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n_items, n_triplets in ((50, 1000), (100, 5000), (500, 20000)):
        m = rng.standard_normal((10, n_items))
        m /= np.linalg.norm(m, axis=0)
        k = np.ascontiguousarray(m.T @ m)
        triplets = np.empty((n_triplets, 3), dtype=np.int64)
        for row in range(n_triplets):
            triplets[row] = rng.choice(n_items, size=3, replace=False)
        triplets = np.ascontiguousarray(triplets)
        times = {
            name: time_call(mod.loss_and_grad, k, triplets, 0.5, True)
            for name, mod in backends.items()
        }
        label = f"N={n_items}, T={n_triplets}"
        row = f"{label:<28}" + "".join(f"{times[name] * 1e6:>10.1f}us" for name in backends)
        if len(times) > 1:
            row += f"{times['pure'] / times['native']:>9.1f}x"
        print(row)


def main():
    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    if "native" not in backends:
        print("compiled extension missing; benchmarking the fallback only")
    bench_mi(backends)
    bench_loss(backends)


if __name__ == "__main__":
    main()
