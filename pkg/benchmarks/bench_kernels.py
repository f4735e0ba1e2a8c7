"""Compiled vs numpy interaction kernels.

    python benchmarks/bench_kernels.py [--sizes 200 1000 4000] [--repeat 5]

Prints the best-of-``repeat`` wall time per call and the largest absolute
difference between the two backends.
"""
import argparse
import timeit

import numpy as np

from mfl import _pykernels, kernels

try:
    from mfl import _ckernels
except ImportError:
    _ckernels = None


def cases(n, rng):
    x = rng.standard_normal(n)
    xd = x[:, None]
    theta = (1.0, 0.7, 1.0, 2.5)
    return {
        "conv gaussian": lambda impl: impl.conv_scalar(x, x, kernels.KERNEL_CODES["gaussian"]),
        "conv tanh": lambda impl: impl.conv_scalar(x, x, kernels.KERNEL_CODES["tanh"]),
        "double layer": lambda impl: impl.double_layer(xd, xd, *theta, False)[0],
        "double layer + grad": lambda impl: impl.double_layer(xd, xd, *theta, True)[1],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 4000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled backend not built; only numpy timings are shown")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>7}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>12}")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
            if _ckernels is None:
                print(f"{name:<22}{n:>7}{t_py:>12.3f}")
                continue
            t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
            diff = float(np.max(np.abs(fn(_pykernels) - fn(_ckernels))))
            print(f"{name:<22}{n:>7}{t_py:>12.3f}{t_c:>12.3f}{t_py / t_c:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
