"""Timing comparison of the numba and numpy kernel backends.

Run:  python3 benchmarks/bench_kernels.py [--sizes 1000,100000,1000000]

Both backends are exercised on identical inputs; results are checked for
bit-equality before timing so a speedup never hides a divergence.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fairex.kernels import _numpy
from fairex.rng import hash64_np


def _timeit(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_egress(backends, n: int) -> list[tuple[str, float]]:
    h = hash64_np(1, 0xE6, np.arange(n, dtype=np.int64))
    ready = np.sort((h % np.uint64(1_000_000_000)).astype(np.int64))
    out = []
    results = {}
    for name, mod in backends:
        results[name] = mod.egress_chain(ready, 233, 0)
        out.append((name, _timeit(mod.egress_chain, ready, 233, 0)))
    _assert_equal(results)
    return out

def bench_mc(backends, iters: int, nodes: int = 100, k: int = 3) -> list[tuple[str, float]]:
    prev = (hash64_np(2, 0xA1, np.arange(iters)[:, None], np.arange(nodes)[None, :])
            % np.uint64(80_000)).astype(np.int64)
    parents = (np.arange(nodes)[:, None] + np.arange(k)[None, :]) % nodes
    edges = (hash64_np(3, 0xB2, np.arange(iters)[:, None, None],
                       np.arange(nodes)[None, :, None], np.arange(k)[None, None, :])
             % np.uint64(60_000)).astype(np.int64) + 20_000
    out = []
    results = {}
    for name, mod in backends:
        results[name] = mod.mc_min_add(prev, parents, edges)
        out.append((name, _timeit(mod.mc_min_add, prev, parents, edges)))
    _assert_equal(results)
    return out


def _assert_equal(results: dict[str, np.ndarray]) -> None:
    vals = list(results.values())
    for v in vals[1:]:
        if not np.array_equal(vals[0], v):
            raise AssertionError("backends disagree")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="10000,100000,1000000")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = [("numpy", _numpy)]
    try:
        from fairex.kernels import _numba

        _numba.egress_chain(np.zeros(4, dtype=np.int64), 1, 0)  # compile
        _numba.mc_min_add(
            np.zeros((2, 2), np.int64), np.zeros((2, 1), np.int64), np.zeros((2, 2, 1), np.int64)
        )
        backends.append(("numba", _numba))
    except ImportError:
        print("numba unavailable; timing numpy only")

    print(f"{'kernel':<14} {'size':>10} " + "".join(f"{n:>12}" for n, _ in backends) + "   speedup")
    for n in sizes:
        times = dict(bench_egress(backends, n))
        ratio = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{'egress_chain':<14} {n:>10} "
              + "".join(f"{times[name] * 1e3:>10.3f}ms" for name, _ in backends)
              + f"   {ratio:6.2f}x")
    for iters in (1_000, 10_000, 100_000):
        times = dict(bench_mc(backends, iters))
        ratio = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{'mc_min_add':<14} {iters:>10} "
              + "".join(f"{times[name] * 1e3:>10.3f}ms" for name, _ in backends)
              + f"   {ratio:6.2f}x")


if __name__ == "__main__":
    main()
