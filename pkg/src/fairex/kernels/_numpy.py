"""Pure-numpy kernel implementations (fallback backend)."""

from __future__ import annotations

import numpy as np


def egress_chain(ready_ns: np.ndarray, tx_ns: int, free0_ns: int) -> np.ndarray:
    """FIFO egress departures for packets in queue order.

    departure[i] = max(ready[i], departure[i-1] + tx), with the link free at
    free0_ns before the first packet. Closed form: subtracting i*tx turns the
    recurrence into a running maximum.
    """
    n = ready_ns.shape[0]
    if n == 0:
        return ready_ns.copy()
    idx = np.arange(n, dtype=np.int64)
    shifted = ready_ns.astype(np.int64) - idx * tx_ns
    if free0_ns > shifted[0]:
        shifted = shifted.copy()
        shifted[0] = free0_ns
    return np.maximum.accumulate(shifted) + idx * tx_ns


def mc_min_add(prev: np.ndarray, parents: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Layer step of the latency recursion.

    prev:    (iters, P) int64   completion times of the parent layer
    parents: (n, K) int64       parent index per node per copy
    edges:   (iters, n, K) int64 per-copy hop delays
    returns  (iters, n) int64   min over copies of prev[parent] + edge
    """
    gathered = prev[:, parents]  # (iters, n, K)
    return np.min(gathered + edges, axis=2)
