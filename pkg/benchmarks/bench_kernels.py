#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Run from the repository root:

    python benchmarks/bench_kernels.py

The same comparison is what NSWRANK_NO_NUMBA=1 switches at import time.
"""

import time

import numpy as np

from nswrank import _kernels
from nswrank.core import ExposureModel
from nswrank.synth import SyntheticConfig, generate_market


def time_call(fn, *args, repeat=3, **kw):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, **kw)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fw(m, n, k, tol=1e-6, max_iters=10000):
    rel_true, _ = generate_market(SyntheticConfig(m=m, n=n, seed=0))
    V = rel_true.values
    e = ExposureModel.make("inverse", n, k).weights
    w = np.ones(n)
    active = np.ones(n, dtype=bool)
    args = (V, e, w, active, tol, max_iters, "pairwise")

    _kernels.fw_solve_numba(*args)  # compile before timing
    t_nb = time_call(_kernels.fw_solve_numba, *args)
    t_np = time_call(_kernels.fw_solve_numpy, *args, repeat=1)
    _, iters, gap, _ = _kernels.fw_solve_numba(*args)
    print(f"welfare solve  m={m:4d} n={n:3d} K={k}  "
          f"numba {t_nb * 1e3:9.1f} ms   numpy {t_np * 1e3:9.1f} ms   "
          f"x{t_np / t_nb:5.1f}   ({iters} passes, gap {gap:.1e})")


def bench_matching(n, trials=200):
    rng = np.random.default_rng(0)
    supports = []
    for _ in range(trials):
        support = np.zeros((n, n), dtype=bool)
        for _ in range(4):
            support[rng.permutation(n), np.arange(n)] = True
        supports.append(support)

    _kernels.perfect_matching_numba(supports[0])  # compile before timing

    def run(fn):
        for s in supports:
            fn(s)

    t_nb = time_call(run, _kernels.perfect_matching_numba)
    t_np = time_call(run, _kernels.perfect_matching_numpy)
    print(f"matching       n={n:4d} x{trials}      "
          f"numba {t_nb * 1e3:9.1f} ms   numpy {t_np * 1e3:9.1f} ms   "
          f"x{t_np / t_nb:5.1f}")


def main():
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba unavailable; nothing to compare")
    print("best of 3 runs (numpy fallback: best of 1)")
    bench_fw(20, 10, 3)
    bench_fw(100, 50, 5)
    bench_fw(200, 50, 10)
    bench_matching(10)
    bench_matching(50)


if __name__ == "__main__":
    main()
