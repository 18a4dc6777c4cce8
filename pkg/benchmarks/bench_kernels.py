"""Compare the compiled and pure-Python RK4 kernels on random linear problems.

    python benchmarks/bench_kernels.py [--steps 20000] [--sizes 4 8 16] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from phsingular import kernels


def problem(N: int, m: int, nsteps: int, seed: int):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    A = 0.5 * (A - A.T) - 0.1 * np.eye(N)
    B = rng.standard_normal((N, m))
    F = 0.05 * rng.standard_normal((m, N))
    Kq = rng.standard_normal((3, N, N))
    Lq = rng.standard_normal((3, N, m))
    lq = rng.standard_normal((3, m))
    z0 = rng.standard_normal(N)
    ust = rng.standard_normal((nsteps, 3, m))
    return A, B, F, Kq, Lq, lq, z0, ust, np.zeros(m), 1e-3, nsteps


def best_time(args, backend: str, stagewise: bool, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernels.rk4_affine(*args, stagewise, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}; steps: {args.steps}")
    print(f"{'N':>4} {'mode':>6} " + " ".join(f"{b:>12}" for b in backends) + f" {'speedup':>8} {'max diff':>10}")
    for N in args.sizes:
        prob = problem(N, max(1, N // 4), args.steps, seed=N)
        for stagewise in (False, True):
            times = {b: best_time(prob, b, stagewise, args.repeat) for b in backends}
            line = f"{N:>4} {'stage' if stagewise else 'step':>6} " + " ".join(
                f"{times[b] * 1e3:>10.1f}ms" for b in backends)
            if "compiled" in times:
                ref = kernels.rk4_affine(*prob, stagewise, backend="python")[0]
                out = kernels.rk4_affine(*prob, stagewise, backend="compiled")[0]
                line += f" {times['python'] / times['compiled']:>7.1f}x {np.abs(ref - out).max():>10.1e}"
            print(line)


if __name__ == "__main__":
    main()
