"""Benchmark the numba kernel build against the pure-numpy fallback.

Times the hot per-SNP kernels (normal CDF, interval masses, bias
correction) at panel sizes spanning a single replicate up to a whole
Monte Carlo study, plus one end-to-end replicate loop.

Usage: python benchmarks/bench_kernels.py [--sizes 100000 1000000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from magicmr import _kernels_numpy

try:
    from magicmr import _kernels_numba
except ImportError:
    _kernels_numba = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_kernels(sizes, repeat):
    backends = [("numpy", _kernels_numpy)]
    if _kernels_numba is not None:
        backends.append(("numba", _kernels_numba))
    rng = np.random.default_rng(0)
    header = f"{'kernel':<18}{'n':>10}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        x = rng.normal(0.0, 3.0, n)
        sigma = np.full(n, 1.0 / np.sqrt(100_000.0))
        beta_hat = x * sigma
        selected = rng.random(n) < 0.5
        a_plus, a_minus = -x + 8.12, -x - 8.12
        cases = {
            "norm_cdf": lambda k: k.norm_cdf(x),
            "interval_masses": lambda k: k.interval_masses(a_plus, a_minus),
            "bias_correct": lambda k: k.bias_correct(beta_hat, sigma, selected,
                                                     4.06, 0.5),
        }
        for label, call in cases.items():
            row = f"{label:<18}{n:>10}"
            timings = []
            for _, kernels in backends:
                call(kernels)  # warm-up (JIT compile on first touch)
                timings.append(best_of(lambda: call(kernels), repeat))
                row += f"{timings[-1] * 1e3:>10.2f}ms"
            if len(timings) == 2:
                row += f"{timings[0] / timings[1]:>9.1f}x"
            print(row)


def bench_replicate(repeat):
    """One full Monte Carlo replicate per backend, via the env-selected path."""
    import os
    import subprocess
    import sys

    sys.stdout.flush()

    code = (
        "import time, magicmr\n"
        "from magicmr.simulation import run_replicates\n"
        "cfg = magicmr.SimConfig(dgp='dgp1', reps=20, seed=0)\n"
        "run_replicates(cfg, methods=('magic',))  # warm-up\n"
        "start = time.perf_counter()\n"
        "run_replicates(cfg, methods=('magic',))\n"
        "elapsed = time.perf_counter() - start\n"
        "print(f'{magicmr.active_backend()}: {elapsed / 20 * 1e3:.1f} ms/replicate'\n"
        "      ' (complete-overlap design, p=100000)')\n"
    )
    for flag in ("1", "0"):
        env = dict(os.environ, MAGICMR_NO_NUMBA=flag)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[100_000, 1_000_000])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--skip-replicate", action="store_true",
                        help="only time the raw kernels")
    args = parser.parse_args()
    bench_kernels(args.sizes, args.repeat)
    if not args.skip_replicate:
        print()
        bench_replicate(args.repeat)


if __name__ == "__main__":
    main()
