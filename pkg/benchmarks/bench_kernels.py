"""Compare the numba kernels with their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--n 2001] [--repeat 5] [--no-end-to-end]

Kernel timings call both variants directly in one process.  The end-to-end
timings run a small acceptance subset twice in subprocesses, once with
``WEAKBOUND_DISABLE_NUMBA=1``.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from weakbound import kernels
from weakbound._backend import HAS_NUMBA


def cases(n: int):
    rng = np.random.default_rng(0)
    d = 2.0 + rng.uniform(0, 1, n)
    e = -np.ones(n - 1)
    shifts_nb = np.array([0.7])
    shifts_many = np.linspace(0.1, 3.0, 255)
    x = np.linspace(0.0, 1.0, n)
    U = 0.5 + 0.5 * rng.uniform(size=n)
    W = 0.5 + 0.5 * rng.uniform(size=n)
    m = int(np.sqrt(n * 4))
    u2 = rng.normal(size=(m, m))
    mx = np.full(m, 1.0 / m)
    nd = min(n, 800)
    return [
        ("sturm_counts (1 shift)", "sturm_counts", (d, e * e, shifts_nb, 1e-300)),
        ("sturm_counts (255 shifts)", "sturm_counts", (d, e * e, shifts_many, 1e-300)),
        ("tridiag_solve", "tridiag_solve", (d, e, rng.normal(size=n), 1e-300)),
        ("green_apply", "green_apply", (U, W, 0.99, rng.normal(size=n))),
        (f"green_dense ({nd}x{nd})", "green_dense", (x[:nd], U[:nd], W[:nd], 3.0, 0.2)),
        (f"stencil2d ({m}x{m})", "stencil2d", (u2, mx, mx, float(m * m), float(m * m))),
    ]


def best_of(fn, args, repeat: int) -> float:
    number = 1
    while True:
        t = timeit.timeit(lambda: fn(*args), number=number)
        if t > 0.05 or number >= 1 << 16:
            break
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def kernel_table(n: int, repeat: int) -> None:
    print(f"kernels at n = {n} (best of {repeat}, seconds per call)")
    print(f"{'kernel':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for label, name, args in cases(n):
        t_np = best_of(getattr(kernels, f"_{name}_np"), args, repeat)
        if HAS_NUMBA:
            fn = getattr(kernels, f"_{name}_nb")
            fn(*args)  # compile outside the timing
            t_nb = best_of(fn, args, repeat)
            print(f"{label:<28}{t_np:>12.3e}{t_nb:>12.3e}{t_np / t_nb:>10.1f}")
        else:
            print(f"{label:<28}{t_np:>12.3e}{'n/a':>12}{'':>10}")


def end_to_end(only: str) -> None:
    print(f"\nend to end: weakbound selftest --only {only}")
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, WEAKBOUND_DISABLE_NUMBA=flag)
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "weakbound.cli", "selftest", "--only", only],
            env=env, capture_output=True, text=True, check=False,
        )
        dt = time.perf_counter() - t0
        status = "ok" if proc.returncode == 0 else f"exit {proc.returncode}"
        print(f"  {label:<6} {dt:8.2f} s  ({status}, includes interpreter start and JIT)")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2001)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--only", default="2,3,11", help="criteria for the end-to-end run")
    p.add_argument("--no-end-to-end", action="store_true")
    args = p.parse_args(argv)
    if not HAS_NUMBA:
        print("numba unavailable or disabled: numpy timings only")
    kernel_table(args.n, args.repeat)
    if not args.no_end_to_end:
        end_to_end(args.only)
    return 0


if __name__ == "__main__":
    sys.exit(main())
