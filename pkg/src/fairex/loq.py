"""Limit Order Queue: epoch/criticality/timestamp priority scheduling.

An order is critical when its price lands inside the action window
[m - w, m + w] around the mid-price m known at enqueue time. Dequeue order
is lexicographic (epoch, criticality, gen_ts, mp, insertion counter); the
epoch counter bumps on every observed mid-price change, so orders generated
before a price movement always outrank orders generated after it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .core import Order

CRITICAL = 0
NON_CRITICAL = 1


def classify(order: Order, m: int, w: int) -> int:
    """0 when price is within [m-w, m+w], else 1. w may be None for +inf."""
    if w is None:
        return CRITICAL
    if m - w <= order.price <= m + w:
        return CRITICAL
    return NON_CRITICAL


@dataclass
class LoqState:
    w: int | None = 2  # None means infinite window (everything critical)
    current_m: int = 0
    current_epoch: int = 0
    _heap: list[tuple[int, int, int, int, int, Order]] = field(default_factory=list)
    _ins: int = 0
    enqueued_count: int = 0
    dequeued_count: int = 0
    epoch_skew_count: int = 0

    def on_mid_price(self, m_new: int) -> None:
        if m_new != self.current_m:
            self.current_m = m_new
            self.current_epoch += 1

    def observe(self, m_new: int, epoch_hint: int | None = None) -> None:
        """Apply a market-data update; count skew against the sender's epoch."""
        self.on_mid_price(m_new)
        if epoch_hint is not None and epoch_hint != self.current_epoch:
            self.epoch_skew_count += 1

    def enqueue(self, order: Order) -> tuple[int, int, int, int]:
        c = classify(order, self.current_m, self.w)
        key = (self.current_epoch, c, order.gen_ts, order.mp)
        heapq.heappush(self._heap, (*key, self._ins, order))
        self._ins += 1
        self.enqueued_count += 1
        return key

    def dequeue(self) -> Order | None:
        if not self._heap:
            return None
        self.dequeued_count += 1
        return heapq.heappop(self._heap)[5]

    def peek_key(self) -> tuple[int, int, int, int] | None:
        if not self._heap:
            return None
        e, c, t, mp, _, _ = self._heap[0]
        return (e, c, t, mp)

    def __len__(self) -> int:
        return len(self._heap)

    def min_pending_gen_ts(self) -> int | None:
        """Smallest gen_ts queued regardless of priority (for dummy watermarks)."""
        if not self._heap:
            return None
        return min(entry[2] for entry in self._heap)

    def drain(self) -> list[Order]:
        out = []
        while self._heap:
            out.append(self.dequeue())
        return out
