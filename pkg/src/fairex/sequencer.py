"""Global-FIFO sequencer: per-source queues gated on all-non-empty.

Orders are released in (gen_ts, mp) order provided each source delivers its
own orders in gen_ts order. A release only happens while every source queue
is non-empty; idle sources must inject dummy orders (heartbeats) to keep the
gate open. Dummies are consumed by the gate but never released downstream.

Two dequeue strategies produce identical output: a linear scan over the n
queue heads, and a heap of current heads for large n.
"""

from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass

from .core import ConfigError, Order

RELEASED = "released"
DISCARDED = "discarded"
BLOCKED = "blocked"


@dataclass(frozen=True)
class SeqTraceRow:
    seq_index: int
    mp: int
    gen_ts: int
    is_dummy_discarded: bool


class Sequencer:
    def __init__(self, n_sources: int, use_heap: bool = False, keep_trace: bool = True):
        if n_sources < 1:
            raise ConfigError(f"n_sources must be >= 1, got {n_sources}")
        self.n = n_sources
        self.use_heap = use_heap
        self.queues: list[deque[Order]] = [deque() for _ in range(n_sources)]
        self._nonempty = 0
        # heap entries: (gen_ts, mp, src); one per non-empty queue's head
        self._heads: list[tuple[int, int, int]] = []
        self.keep_trace = keep_trace
        self.trace: list[SeqTraceRow] = []
        self._seq_index = 0
        self.released_count = 0
        self.discarded_count = 0

    def enqueue(self, order: Order, src: int) -> None:
        if not 0 <= src < self.n:
            raise ConfigError(f"source index {src} out of range [0, {self.n})")
        q = self.queues[src]
        if not q:
            self._nonempty += 1
            if self.use_heap:
                heapq.heappush(self._heads, (order.gen_ts, order.mp, src))
        q.append(order)

    def _pick_source(self) -> int:
        if self.use_heap:
            return self._heads[0][2]
        best_src = 0
        best_key = None
        for src, q in enumerate(self.queues):
            head = q[0]
            key = (head.gen_ts, head.mp, src)
            if best_key is None or key < best_key:
                best_key = key
                best_src = src
        return best_src

    def dequeue_step(self) -> tuple[str, Order | None]:
        if self._nonempty < self.n:
            return (BLOCKED, None)
        src = self._pick_source()
        q = self.queues[src]
        order = q.popleft()
        if self.use_heap:
            heapq.heappop(self._heads)
            if q:
                nxt = q[0]
                heapq.heappush(self._heads, (nxt.gen_ts, nxt.mp, src))
        if not q:
            self._nonempty -= 1
        if self.keep_trace:
            self.trace.append(
                SeqTraceRow(self._seq_index, order.mp, order.gen_ts, order.is_dummy)
            )
        self._seq_index += 1
        if order.is_dummy:
            self.discarded_count += 1
            return (DISCARDED, order)
        self.released_count += 1
        return (RELEASED, order)

    def drain(self) -> list[Order]:
        """Run dequeue steps until blocked; return the real orders released."""
        out: list[Order] = []
        while True:
            status, order = self.dequeue_step()
            if status == BLOCKED:
                return out
            if status == RELEASED:
                assert order is not None
                out.append(order)

    def pending_min_gen_ts(self) -> int | None:
        """Smallest gen_ts still queued, across all sources (None if empty)."""
        heads = [q[0].gen_ts for q in self.queues if q]
        return min(heads) if heads else None


@dataclass
class HeartbeatState:
    """Idle detector for one source; emits a dummy when quiet >= period."""

    mp: int
    period_ns: int
    last_activity_ns: int = 0

    def note_activity(self, now_ns: int) -> None:
        self.last_activity_ns = now_ns

    def maybe_emit(self, now_ns: int) -> Order | None:
        if now_ns - self.last_activity_ns >= self.period_ns:
            self.last_activity_ns = now_ns
            return Order(mp=self.mp, gen_ts=now_ns, is_dummy=True)
        return None


def dump_seq_trace_csv(path: str, trace: list[SeqTraceRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seq_index", "mp", "gen_ts", "is_dummy_discarded"])
        for r in trace:
            w.writerow([r.seq_index, r.mp, r.gen_ts, int(r.is_dummy_discarded)])
