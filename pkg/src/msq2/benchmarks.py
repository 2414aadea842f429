"""Timing comparison of the numba kernels against the numpy fallbacks.

Run via ``msq2 bench`` (or set MSQ2_NO_NUMBA=1 to confirm the fallback path
is the one being compared against itself).
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels


def _time(fn, *args, repeats: int = 5) -> float:
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(n: int = 1024) -> dict:
    rng = np.random.default_rng(0)
    u = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    w1 = rng.standard_normal(n)
    w2 = rng.standard_normal(n)
    coord = np.linspace(-20, 20, 256)
    freq = np.linspace(-2, 2, 512)

    cases = {
        "nl_substep": ((_kernels.nl_substep, u, 0.01, 1 + 1j),
                       (_kernels.nl_substep_numpy, u, 0.01, 1 + 1j)),
        "phase_twist": ((_kernels.phase_twist, u, w1, w2, 7.0),
                        (_kernels.phase_twist_numpy, u, w1, w2, 7.0)),
        "u_plus_phase": ((_kernels.u_plus_phase, coord, freq),
                         (_kernels.u_plus_phase_numpy, coord, freq)),
    }
    results = {}
    print(f"kernel benchmark at n={n} "
          f"(active path: {'numba' if _kernels.USE_NUMBA else 'numpy'})")
    for name, (active, fallback) in cases.items():
        ta = _time(*active)
        tf = _time(*fallback)
        a = active[0](*active[1:])
        b = fallback[0](*fallback[1:])
        dev = float(np.max(np.abs(a - b)))
        results[name] = {"active_s": ta, "numpy_s": tf, "max_dev": dev}
        print(f"  {name:14s} active {ta * 1e3:8.2f} ms   numpy {tf * 1e3:8.2f} ms"
              f"   speedup {tf / ta:5.2f}x   max|diff| {dev:.2e}")
    return results
