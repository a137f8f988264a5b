"""Compare the numba and numpy RK4 batch kernels on a cubic switching field.

Run: PYTHONPATH=src python3 benchmarks/bench_kernels.py [n_orbits] [steps]
"""
import sys
import time

import numpy as np

from switchlyap.numerics import kernels

# x' = y - x^2 - 2x^3, y' = x^2 - x^3 (upper); mirrored cubic terms below
UPPER = np.array([[0, 1, 1.0, 0.0], [2, 0, -1.0, 1.0], [3, 0, -2.0, -1.0]])
LOWER = np.array([[0, 1, 1.0, 0.0], [2, 0, -1.0, 2.0], [3, 0, 2.0, -1.0]])


def run(backend: str, n: int, steps: int) -> float:
    rng = np.random.default_rng(0)
    seeds = rng.uniform(-0.5, 0.5, size=(n, 2))
    t = time.perf_counter()
    kernels.rk4_batch(seeds, UPPER, LOWER, 0, 0.01, steps, backend=backend)
    return time.perf_counter() - t


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
    if kernels.USE_NUMBA:
        run("numba", 2, 2)  # compile outside the timing
        tn = run("numba", n, steps)
    else:
        tn = float("nan")
    tp = run("numpy", n, steps)
    a = kernels.rk4_batch(np.array([[0.3, 0.1]]), UPPER, LOWER, 0, 0.01, 500, backend="numpy")
    if kernels.USE_NUMBA:
        b = kernels.rk4_batch(np.array([[0.3, 0.1]]), UPPER, LOWER, 0, 0.01, 500, backend="numba")
        print(f"max backend difference: {np.abs(a - b).max():.3e}")
    print(f"orbits={n} steps={steps}")
    print(f"numba: {tn:.3f} s")
    print(f"numpy: {tp:.3f} s")
    if tn == tn:
        print(f"speedup: {tp / tn:.1f}x")


if __name__ == "__main__":
    main()
