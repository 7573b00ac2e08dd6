"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on identical inputs under both backends; the table shows the
best wall time of ``--repeat`` runs and the speedup of the compiled build.
Outputs are checked for agreement before timing.
"""
import argparse
import time

import numpy as np

from randprod import kernels


def workloads():
    rng = np.random.default_rng(0)
    a = rng.uniform(0.5, 10.0, size=200_000)
    x = rng.uniform(0.0, 20.0, size=200_000)
    steps, paths, k = 512, 256, 3
    xs = np.eye(k) + 0.05 * rng.normal(size=(steps, paths, k, k))
    start = np.broadcast_to(np.eye(k), (paths, k, k)).copy()
    exp0 = np.zeros(paths, dtype=np.int64)
    record = np.zeros(steps, dtype=bool)
    record[::64] = True
    return {
        "philox_uniforms (262k blocks)": lambda: kernels.philox_uniforms(7, 12345, 3, 9, 0, 1 << 18),
        "gammainc (200k pairs)": lambda: kernels.gammainc(a, x),
        "chain_products (512 steps x 256 paths, 3x3)": lambda: kernels.chain_products(start, exp0, xs, record),
    }


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "iu":
        return np.array_equal(a, b)
    return np.allclose(a, b, rtol=1e-12, atol=1e-13)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    previous = kernels.backend_name()
    print(f"{'kernel':46s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    try:
        for name, fn in workloads().items():
            results, times = {}, {}
            for b in backends:
                kernels.set_backend(b)
                results[b] = fn()
                times[b] = best_time(fn, args.repeat)
            if len(backends) > 1 and not agree(results["compiled"], results["python"]):
                raise SystemExit(f"backends disagree on {name}")
            row = f"{name:46s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
            if len(backends) > 1:
                row += f"{times['python'] / times['compiled']:11.1f}x"
            print(row)
    finally:
        kernels.set_backend(previous)


if __name__ == "__main__":
    main()
