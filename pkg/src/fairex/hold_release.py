"""Outbound fairness: OWD estimation, global all-reduce, deadline release.

Each receiver keeps a window of measured one-way delays (by its own clock)
and periodically reports the 95th percentile (nearest-rank) up the tree.
Proxies forward the max of whatever reports they have; the root's max is the
global OWD, which it adds to its clock to stamp deadlines on outgoing
messages. Receivers hold accepted messages until the deadline by their local
clock, releasing late arrivals immediately (a counted miss, not a drop).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .core import NS_PER_MS, MulticastMessage, NodeAddr, VmClock


def nearest_rank(sorted_vals: list[int], fraction: float) -> int:
    """Nearest-rank percentile: value at rank ceil(fraction * n), 1-indexed."""
    n = len(sorted_vals)
    if n == 0:
        raise ValueError("empty sample window")
    rank = max(1, -(-int(fraction * 1000 * n) // 1000))  # ceil without floats
    return sorted_vals[min(rank, n) - 1]


@dataclass
class OwdEstimator:
    """Per-receiver OWD window; cleared after each periodic report."""

    percentile: float = 0.95
    report_period_ms: float = 100.0
    window: list[int] = field(default_factory=list)
    negative_samples: int = 0

    def record(self, clock: VmClock, msg_send_ts: int, arrival_true_ns: int) -> int:
        sample = clock.read(arrival_true_ns) - msg_send_ts
        if sample < 0:
            self.negative_samples += 1
            sample = 0
        self.window.append(sample)
        return sample

    def report(self) -> int | None:
        """Percentile of the current window; clears it. None when empty."""
        if not self.window:
            return None
        est = nearest_rank(sorted(self.window), self.percentile)
        self.window.clear()
        return est

    def period_ns(self) -> int:
        return int(round(self.report_period_ms * NS_PER_MS))


@dataclass
class ProxyAggregate:
    """Max of child estimates received since the last forward."""

    best: int | None = None

    def absorb(self, estimate: int | None) -> None:
        if estimate is None:
            return
        if self.best is None or estimate > self.best:
            self.best = estimate

    def forward(self) -> int | None:
        out = self.best
        self.best = None
        return out


@dataclass
class GlobalOwd:
    """Root-side holder of the current global OWD estimate."""

    initial_headroom_ns: int
    owd_g_ns: int | None = None
    computed_at: int = 0

    def update_from_reports(self, reports: list[int], now_ns: int) -> None:
        if not reports:
            return
        self.owd_g_ns = max(reports)
        self.computed_at = now_ns

    def current(self) -> int:
        return self.owd_g_ns if self.owd_g_ns is not None else self.initial_headroom_ns


def stamp_deadline(
    msg: MulticastMessage, root_clock_ns: int, owd_g_ns: int, margin_ns: int = 0
) -> MulticastMessage:
    return MulticastMessage(
        msg_id=msg.msg_id,
        send_ts=msg.send_ts,
        deadline=root_clock_ns + owd_g_ns + margin_ns,
        size_bytes=msg.size_bytes,
    )


@dataclass
class ReleaseGate:
    """Deadline-gated release at one receiver, by its local clock."""

    clock: VmClock
    misses: int = 0
    held_total_ns: int = 0

    def release(self, msg: MulticastMessage, arrival_true_ns: int) -> int:
        """Returns the release time in true nanoseconds."""
        local_arrival = self.clock.read(arrival_true_ns)
        if local_arrival > msg.deadline:
            self.misses += 1
            return arrival_true_ns
        self.held_total_ns += msg.deadline - local_arrival
        return self.clock.to_true(msg.deadline)


# -- metrics ----------------------------------------------------------------


@dataclass
class MessageLatencyRow:
    msg_id: int
    send_true_ns: int
    oml_ns: int  # max release - send (true times)
    dws_ns: int  # max - min release (true times)
    dws_raw_ns: int  # max - min raw arrival (true times)
    misses: int
    lost: int  # receivers that never got the message


def collect_message_metrics(
    msg_id: int,
    send_true_ns: int,
    releases_true_ns: list[int],
    arrivals_true_ns: list[int],
    misses: int,
    expected_receivers: int,
) -> MessageLatencyRow:
    lost = expected_receivers - len(releases_true_ns)
    oml = max(r - send_true_ns for r in releases_true_ns)
    dws = max(releases_true_ns) - min(releases_true_ns) if lost == 0 else 0
    dws_raw = max(arrivals_true_ns) - min(arrivals_true_ns) if lost == 0 else 0
    return MessageLatencyRow(msg_id, send_true_ns, oml, dws, dws_raw, misses, lost)


def percentile_ns(values: list[int], fraction: float) -> int:
    return nearest_rank(sorted(values), fraction)


def p_fair(dws_values_ns: list[int], threshold_ns: int = 1_000) -> int:
    """Highest integer percentile p with p-quantile(DWS) <= threshold."""
    if not dws_values_ns:
        return 0
    s = sorted(dws_values_ns)
    best = 0
    for p in range(1, 101):
        if nearest_rank(s, p / 100.0) <= threshold_ns:
            best = p
        else:
            break
    return best


@dataclass
class MetricsSummary:
    oml_p50: int
    oml_p90: int
    oml_p99: int
    dws_p50: int
    dws_p99: int
    p_fair: int
    messages: int
    misses: int
    lost: int


def summarize_rows(rows: list[MessageLatencyRow], threshold_ns: int = 1_000) -> MetricsSummary:
    complete = [r for r in rows if r.lost == 0]
    omls = [r.oml_ns for r in rows]
    dwss = [r.dws_ns for r in complete]
    return MetricsSummary(
        oml_p50=percentile_ns(omls, 0.50),
        oml_p90=percentile_ns(omls, 0.90),
        oml_p99=percentile_ns(omls, 0.99),
        dws_p50=percentile_ns(dwss, 0.50) if dwss else 0,
        dws_p99=percentile_ns(dwss, 0.99) if dwss else 0,
        p_fair=p_fair(dwss, threshold_ns),
        messages=len(rows),
        misses=sum(r.misses for r in rows),
        lost=sum(r.lost for r in rows),
    )


def dump_metrics_csv(path: str, rows: list[MessageLatencyRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["msg_id", "send_true_ns", "oml_ns", "dws_ns", "dws_raw_ns", "misses", "lost"])
        for r in rows:
            w.writerow([r.msg_id, r.send_true_ns, r.oml_ns, r.dws_ns, r.dws_raw_ns, r.misses, r.lost])
