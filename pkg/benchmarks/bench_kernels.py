"""Compare the numba and pure-numpy kernel paths.

    python benchmarks/bench_kernels.py [--sizes 50 100 200 400] [--d 1 2 3] [--repeat 5]

Both paths are called directly (the ``EDMLNGM_DISABLE_NUMBA`` flag only
chooses which one the library dispatches to). Each row reports the best of
``--repeat`` timings and the maximum deviation between the two outputs.
"""

import argparse
import timeit

import numpy as np

from edmlngm import _accel, kernels

KERNELS = ("sq_dist_matrix", "gauss_newton_blocks", "pair_distance_sum")


def best_time(fn, arg, repeat):
    number = 1
    while timeit.timeit(lambda: fn(arg), number=number) < 0.05 and number < 10_000:
        number *= 2
    return min(timeit.repeat(lambda: fn(arg), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--d", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _accel.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>6}{'d':>4}{'numpy [ms]':>13}{'numba [ms]':>13}{'speedup':>9}{'max dev':>11}")
    for name in KERNELS:
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        for n in args.sizes:
            for d in args.d:
                P = rng.standard_normal((n, d))
                f_nb(P)  # compile outside the timing
                dev = float(np.max(np.abs(np.asarray(f_np(P)) - np.asarray(f_nb(P)))))
                t_np = best_time(f_np, P, args.repeat)
                t_nb = best_time(f_nb, P, args.repeat)
                print(f"{name:<22}{n:>6}{d:>4}{1e3 * t_np:>13.4f}{1e3 * t_nb:>13.4f}"
                      f"{t_np / t_nb:>9.2f}{dev:>11.1e}")


if __name__ == "__main__":
    main()
