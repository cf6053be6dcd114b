"""Timing comparison of the compiled kernel extension vs the numpy fallback.

Run as: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from tabppo.numcore import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = np.ascontiguousarray(rng.normal(size=(4096, 64)))
    grad = np.ascontiguousarray(rng.normal(size=(4096, 64)))
    idx = rng.integers(0, 500, size=4096)
    table = np.zeros((500, 64))

    def with_backend(b):
        y = b.softmax_fwd(x)
        ln, rstd = b.layernorm_fwd(x, 1e-5)
        return {
            "softmax_fwd": lambda: b.softmax_fwd(x),
            "softmax_bwd": lambda: b.softmax_bwd(y, grad),
            "layernorm_fwd": lambda: b.layernorm_fwd(x, 1e-5),
            "layernorm_bwd": lambda: b.layernorm_bwd(ln, rstd, grad),
            "scatter_add_rows": lambda: b.scatter_add_rows(table, idx, grad),
        }

    return with_backend


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    make = cases(np.random.default_rng(0))
    python = make(kernels.get_backend("python"))
    try:
        compiled = make(kernels.get_backend("compiled"))
    except ImportError:
        print("compiled extension not built; showing fallback timings only")
        compiled = None

    print(f"{'kernel':<18}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, py_fn in python.items():
        t_py = best_of(py_fn, args.repeat)
        if compiled is None:
            print(f"{name:<18}  {t_py * 1e3:>8.3f}ms")
            continue
        t_cy = best_of(compiled[name], args.repeat)
        print(f"{name:<18}  {t_py * 1e3:>8.3f}ms  {t_cy * 1e3:>8.3f}ms  "
              f"{t_py / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
