"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [trials]

The trial kernel is timed on pre-generated random inputs (the same arrays
both paths consume in production, so outputs must match bit for bit); the
layer accumulator is timed on one audit-sized batch.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from eprsim import _kernels
from eprsim.layers import INV_PERM_TABLE
from eprsim.measure import GridSpec, sign_pm, unit_vector
from eprsim.simulate import _categorical_cumulative


def timeit(fn, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_trials(n: int) -> None:
    grid = GridSpec(8)
    m = grid.m
    a = unit_vector([0.6, 0.8, 0.0])
    b = unit_vector([0.36, 0.48, 0.8])
    cum, _ = _categorical_cumulative(grid, a, b)
    sa = np.asarray(sign_pm(a), dtype=np.int64)
    sb = np.asarray(sign_pm(b), dtype=np.int64)
    rng = np.random.default_rng(0)
    args = (
        rng.integers(0, m + 1, n), rng.integers(0, m + 1, n),
        rng.integers(0, 6, n), rng.integers(0, 6, n),
        rng.random(n), rng.integers(0, 3 * m, n), rng.integers(0, 3 * m, n),
        rng.random(n), rng.random(n), cum, sa, sb, INV_PERM_TABLE, m,
    )

    print(f"\ntrial outcomes, {n:,} trials (K=8)")
    t_np, res_np = timeit(lambda: _kernels.trial_outcomes_numpy(*args))
    print(f"  numpy : {t_np * 1e3:8.2f} ms  ({n / t_np / 1e6:6.1f} M trials/s)")
    if _kernels.HAVE_NUMBA:
        _kernels.trial_outcomes_numba(*args)  # compile outside the timing
        t_nb, res_nb = timeit(lambda: _kernels.trial_outcomes_numba(*args))
        print(f"  numba : {t_nb * 1e3:8.2f} ms  ({n / t_nb / 1e6:6.1f} M trials/s)")
        print(f"  speedup: {t_np / t_nb:.2f}x")
        identical = all(np.array_equal(x, y) for x, y in zip(res_np, res_nb))
        print(f"  outputs bit-identical: {identical}")
        if not identical:
            raise SystemExit("kernel paths disagree")
    else:
        print("  numba : not available")


def bench_layers(count: int) -> None:
    grid = GridSpec(4)
    m = grid.m
    side = grid.side
    rng = np.random.default_rng(1)
    bj = rng.integers(0, m + 1, count)
    bk = rng.integers(0, m + 1, count)
    cp = rng.integers(0, 6, count)
    rp = rng.integers(0, 6, count)
    hosts = np.argsort(rng.random((count, 9 * m * m)), axis=1)[:, : 3 * m]
    comp_mass = np.array([0.5, 0.3, 0.2])
    chunk = rng.random(3 * m)

    def run(impl):
        s1 = np.zeros(side * side)
        s2 = np.zeros(side * side)
        impl(bj, bk, cp, rp, hosts, comp_mass, chunk, INV_PERM_TABLE, m, side,
             s1, s2)
        return s1

    print(f"\nlayer-mass accumulation, {count:,} layers (K=4)")
    t_np, s_np = timeit(lambda: run(_kernels.accumulate_layer_masses_numpy))
    print(f"  numpy : {t_np * 1e3:8.2f} ms")
    if _kernels.HAVE_NUMBA:
        run(_kernels.accumulate_layer_masses_numba)
        t_nb, s_nb = timeit(lambda: run(_kernels.accumulate_layer_masses_numba))
        print(f"  numba : {t_nb * 1e3:8.2f} ms")
        print(f"  speedup: {t_np / t_nb:.2f}x")
        print(f"  max |delta|: {np.abs(s_np - s_nb).max():.2e}")
    else:
        print("  numba : not available")


if __name__ == "__main__":
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    print(f"numba enabled: {_kernels.NUMBA_ENABLED} "
          f"(EPRSIM_DISABLE_NUMBA forces the numpy path)")
    bench_trials(trials)
    bench_layers(50_000)
