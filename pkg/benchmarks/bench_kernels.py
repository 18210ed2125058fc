"""Compare the numba and pure-numpy implementations of the hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--paths 20000] [--steps 1024] [--repeat 3]

Each kernel is called once to trigger compilation, then timed ``--repeat``
times on identical inputs; the best time is reported together with the
largest absolute difference between the two backends.
"""

import argparse
import time

import numpy as np

from penfbm import kernels


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=1024)
    parser.add_argument("--euler-paths", type=int, default=2_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    dt = 1.0 / args.steps
    paths = np.zeros((args.paths, args.steps + 1))
    np.cumsum(rng.standard_normal((args.paths, args.steps)) * np.sqrt(dt), axis=1, out=paths[:, 1:])
    z = rng.standard_normal((args.euler_paths, args.steps))
    streams = np.arange(args.euler_paths, dtype=np.uint64)
    window = max(1, args.steps // 100)

    cases = {
        "penalized_log_weights": (
            lambda: kernels.penalized_log_weights_numba(paths, dt),
            lambda: kernels.penalized_log_weights_numpy(paths, dt),
        ),
        "row_min_max": (lambda: kernels.row_min_max_numba(paths), lambda: kernels.row_min_max_numpy(paths)),
        "sliding_range_max": (
            lambda: kernels.sliding_range_max_numba(paths, window),
            lambda: kernels.sliding_range_max_numpy(paths, window),
        ),
    }
    for kind, code in kernels.KINDS.items():
        x0 = np.sqrt(dt) if kind == "meander" else 0.0
        cases[f"euler[{kind}]"] = (
            lambda code=code, x0=x0: kernels.euler_numba(code, x0, z, dt, np.sqrt(dt), streams, 0)[1:],
            lambda code=code, x0=x0: kernels.euler_numpy(code, x0, z, dt, np.sqrt(dt), streams, 0)[1:],
        )

    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, (fast, slow) in cases.items():
        fast()  # compile
        t_fast, a = best_time(fast, args.repeat)
        t_slow, b = best_time(slow, args.repeat)
        print(f"{name:<24}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}{max_diff(a, b):>14.2e}")


if __name__ == "__main__":
    main()
