#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Run after an editable install:

    python3 benchmarks/bench_kernels.py

The compiled path pays off on the small dimensions the toolkit iterates over
thousands of times (ergodic limits, Cesaro means, Stein series); above the
crossover the dispatcher in cpfock.kernels hands back to BLAS.
"""

import timeit

import numpy as np

from cpfock import _kernels_py as kpy

try:
    from cpfock import _kernels_cy as kcy
except ImportError:
    kcy = None


def contractive_stack(rng, n, d, c=0.9):
    a = rng.randn(n, d, d) + 1j * rng.randn(n, d, d)
    s = sum(x @ x.conj().T for x in a)
    return a * np.sqrt(c / np.linalg.eigvalsh(s)[-1])


def bench(fn, *args, number=30):
    return timeit.timeit(lambda: fn(*args), number=number) / number


def main():
    rng = np.random.RandomState(0)
    print(f"{'case':<34}{'numpy':>12}{'cython':>12}{'speedup':>10}")
    cases = [
        ("apply_map", "apply_map", (), 1),
        ("power_apply k=500", "power_apply", (500,), 1),
        ("cesaro_mean k=500", "cesaro_mean", (500,), 1),
        ("neumann_sum k=200", "neumann_sum", (200,), 1),
    ]
    for d in (2, 4, 8, 16, 32, 64):
        n = 3
        a = contractive_stack(rng, n, d)
        x = np.eye(d, dtype=np.complex128)
        for label, fname, extra, _ in cases:
            t_py = bench(getattr(kpy, fname), a, x, *extra)
            row = f"d={d:<3} n={n} {label:<24}"
            if kcy is None:
                print(f"{row}{t_py * 1e3:>10.3f}ms{'n/a':>12}{'':>10}")
                continue
            t_cy = bench(getattr(kcy, fname), a, x, *extra)
            print(f"{row}{t_py * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms{t_py / t_cy:>9.1f}x")
        print()


if __name__ == "__main__":
    main()
