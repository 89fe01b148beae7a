"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend, the speedup, and the max abs difference between their outputs.
"""

import argparse
import time

import numpy as np

from doublewell.kernels import available_backends, get_backend
from doublewell.oracle import TruncatedFockBasis


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    n = 4097
    f = rng.normal(size=n)
    stencil = rng.normal(size=2 * 600 + 1)
    F = rng.normal(size=(40, n))
    M, N = 4, 12
    fb = TruncatedFockBasis.build(M, N)
    h = rng.normal(size=(M, M))
    h = h + h.T
    w = rng.normal(size=(M, M, M, M))
    w = w + w.transpose(1, 0, 3, 2)
    w = w + w.transpose(3, 2, 1, 0)
    return {
        f"convolve n={n} m=600": lambda k: k.convolve(f, stencil),
        f"convolve_rows 40x{n}": lambda k: k.convolve_rows(F, stencil),
        f"many_body_matrix M={M} N={N} dim={fb.dim}": (
            lambda k: k.many_body_matrix(fb.states, h, w, 0.05)
        ),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the Python fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<44}{'python [s]':>12}{'cython [s]':>12}{'speedup':>9}{'max diff':>11}")
    for name, run in cases(rng).items():
        t_py, out_py = _best(lambda: run(get_backend("python")), args.repeat)
        if "cython" in backends:
            t_c, out_c = _best(lambda: run(get_backend("cython")), args.repeat)
            diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_c))))
            print(f"{name:<44}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}{diff:>11.1e}")
        else:
            print(f"{name:<44}{t_py:>12.4f}{'-':>12}{'-':>9}{'-':>11}")


if __name__ == "__main__":
    main()
