"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time of each kernel for both backends and the
speed-up. Without a built extension only the Python column is shown.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from lrm import _kernels_py

try:
    from lrm import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _problem(r: int, n: int, m: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((m, r))
    w = rng.standard_normal((m, n))
    gram = b.T @ b
    lin = b.T @ w
    l0 = _kernels_py.project_l1_columns(rng.standard_normal((r, n)) / r, 1.0)
    return gram, lin, l0


def _cases():
    for r, n in ((4, 16), (8, 64), (16, 128), (32, 256)):
        gram, lin, l0 = _problem(r, n, 2 * r)
        x = np.random.default_rng(1).standard_normal((r, n))
        yield f"project r={r} n={n}", lambda k, x=x: k.project_l1_columns(x, 1.0)
        yield (
            f"nesterov r={r} n={n}",
            lambda k, g=gram, c=lin, l=l0: k.nesterov_l(g, c, 1.0, l, 1e-12, 1.0, 200, 60),
        )


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    print(f"{'kernel':<24}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for name, call in _cases():
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
        if _kernels_c is None:
            print(f"{name:<24}{t_py * 1e3:>14.3f}{'-':>14}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: call(_kernels_c), number=1, repeat=args.repeat))
        print(f"{name:<24}{t_py * 1e3:>14.3f}{t_c * 1e3:>14.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
