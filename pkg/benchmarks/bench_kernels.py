"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --m 3000 --n 6000 --d 3 --repeat 5
"""

import argparse
import time

import numpy as np

from bicx import _kernels as K


def best_of(fn, args, repeat):
    fn(*args)  # warm-up, includes JIT compilation for the numba path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=3000, help="query rows")
    ap.add_argument("--n", type=int, default=6000, help="particle rows")
    ap.add_argument("--d", type=int, default=3, help="columns")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    y = rng.standard_normal((args.m, args.d))
    x = rng.standard_normal((args.n, args.d))
    logw = np.full(args.n, -np.log(args.n))
    inv_var = np.full(args.d, 2.0)
    cases = {
        "kernel_mean": ((y, x, logw, inv_var), K.kernel_mean_np, getattr(K, "kernel_mean_nb", None)),
        "log_kernel_sum": ((y, x, inv_var, logw), K.log_kernel_sum_np, getattr(K, "log_kernel_sum_nb", None)),
        "nearest_index": ((y, x), K.nearest_index_np, getattr(K, "nearest_index_nb", None)),
    }
    print(f"m={args.m} n={args.n} d={args.d} numba_available={K._HAVE_NUMBA}")
    print(f"{'kernel':<16}{'numpy s':>10}{'numba s':>10}{'speedup':>9}")
    for name, (a, f_np, f_nb) in cases.items():
        t_np = best_of(f_np, a, args.repeat)
        if f_nb is None or not K._HAVE_NUMBA:
            print(f"{name:<16}{t_np:>10.4f}{'n/a':>10}{'n/a':>9}")
            continue
        t_nb = best_of(f_nb, a, args.repeat)
        print(f"{name:<16}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
