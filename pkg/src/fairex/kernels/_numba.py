"""Numba-compiled kernel implementations (default when importable)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _egress_chain_impl(ready_ns, tx_ns, free0_ns):
    n = ready_ns.shape[0]
    out = np.empty(n, dtype=np.int64)
    free = free0_ns
    for i in range(n):
        d = ready_ns[i]
        if free > d:
            d = free
        out[i] = d
        free = d + tx_ns
    return out


def egress_chain(ready_ns: np.ndarray, tx_ns: int, free0_ns: int) -> np.ndarray:
    if ready_ns.shape[0] == 0:
        return ready_ns.copy()
    return _egress_chain_impl(ready_ns.astype(np.int64), tx_ns, free0_ns)


@njit(cache=True)
def _mc_min_add_impl(prev, parents, edges):
    iters, n, k = edges.shape
    out = np.empty((iters, n), dtype=np.int64)
    for it in range(iters):
        for i in range(n):
            best = prev[it, parents[i, 0]] + edges[it, i, 0]
            for j in range(1, k):
                v = prev[it, parents[i, j]] + edges[it, i, j]
                if v < best:
                    best = v
            out[it, i] = best
    return out


def mc_min_add(prev: np.ndarray, parents: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return _mc_min_add_impl(
        prev.astype(np.int64), parents.astype(np.int64), edges.astype(np.int64)
    )
