"""Deterministic discrete-event network simulator.

Clique topology of registered VMs. Every link delay is a pure function of
(seed, src, dst, msg_id, copy, attempt), so traces never depend on event
execution order. Egress is a per-VM FIFO at the VM's configured bandwidth;
ingress is a finite queue with fixed per-message service time, and arrivals
that find the queue full are dropped (the only loss mechanism).

Time is integer nanoseconds. Events with equal fire time run in insertion
order.
"""

from __future__ import annotations

import bisect
import csv
import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .core import NS_PER_MS, NS_PER_S, NS_PER_US, ConfigError, NodeAddr, tx_ns
from .rng import (
    DOM_LINK,
    DOM_SPIKE_MAG,
    DOM_SPIKE_ON,
    hash64,
    u01,
)

JITTER_NONE = "none"
JITTER_CONSTANT = "constant"
JITTER_UNIFORM = "uniform"
JITTER_LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class LatencyModel:
    """Per-link one-way delay: base + jitter (+ any active spike)."""

    base_us: float = 25.0
    jitter_kind: str = JITTER_LOGNORMAL
    jitter_const_us: float = 0.0  # constant
    jitter_lo_us: float = 0.0  # uniform low
    jitter_hi_us: float = 0.0  # uniform high
    jitter_scale_us: float = 5.0  # lognormal scale
    jitter_sigma: float = 0.5  # lognormal shape
    spike_rate_per_s: float = 0.0
    spike_magnitude_us: float = 0.0
    spike_duration_ms: float = 0.0

    def base_ns(self) -> int:
        return int(round(self.base_us * NS_PER_US))

    def jitter_ns(self, h: int) -> int:
        if self.jitter_kind == JITTER_NONE:
            return 0
        if self.jitter_kind == JITTER_CONSTANT:
            return int(round(self.jitter_const_us * NS_PER_US))
        if self.jitter_kind == JITTER_UNIFORM:
            lo = int(round(self.jitter_lo_us * NS_PER_US))
            hi = int(round(self.jitter_hi_us * NS_PER_US))
            if hi <= lo:
                return lo
            return lo + h % (hi - lo + 1)
        if self.jitter_kind == JITTER_LOGNORMAL:
            u1 = u01(h)
            u2 = u01(hash64(h, 0x5A))
            z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
            extra = self.jitter_scale_us * math.exp(self.jitter_sigma * z)
            return int(round(extra * NS_PER_US))
        raise ConfigError(f"unknown jitter kind {self.jitter_kind!r}")


@dataclass(frozen=True)
class VmProfile:
    egress_gbps: float = 16.0
    ingress_queue_pkts: int = 0  # 0 = unlimited
    straggler_factor: float = 1.0
    proc_delay_us: float = 0.0

    def __post_init__(self):
        if self.straggler_factor < 1.0:
            raise ConfigError("straggler_factor must be >= 1")
        if self.ingress_queue_pkts < 0:
            raise ConfigError("ingress_queue_pkts must be >= 0")

    def proc_ns(self) -> int:
        return int(round(self.proc_delay_us * NS_PER_US))

    def factor_milli(self) -> int:
        return int(round(self.straggler_factor * 1000))


@dataclass(frozen=True)
class DeliveryInfo:
    msg_id: int
    src: NodeAddr
    dst: NodeAddr
    sent_ns: int  # departure (egress slot start)
    delivered_ns: int  # ingress service completion
    copy: int = 0
    attempt: int = 0


@dataclass
class _Ingress:
    """Finite queue + serial server with fixed service time."""

    capacity: int
    service_ends: deque = field(default_factory=deque)
    last_end: int = 0

    def admit(self, now: int, proc_ns: int) -> int | None:
        while self.service_ends and self.service_ends[0] <= now:
            self.service_ends.popleft()
        if self.capacity > 0 and len(self.service_ends) >= self.capacity:
            return None
        start = max(now, self.last_end)
        end = start + proc_ns
        self.last_end = end
        self.service_ends.append(end)
        return end


class Netsim:
    def __init__(
        self,
        seed: int,
        latency: LatencyModel | None = None,
        horizon_ns: int = 10 * NS_PER_S,
        keep_trace: bool = True,
    ):
        self.seed = seed
        self.latency = latency or LatencyModel()
        self.horizon_ns = horizon_ns
        self.keep_trace = keep_trace
        self.now = 0
        self._events: list[tuple[int, int, object]] = []
        self._eseq = 0
        self.profiles: dict[NodeAddr, VmProfile] = {}
        self._egress_free: dict[NodeAddr, int] = {}
        self._ingress: dict[NodeAddr, _Ingress] = {}
        self._link_latency: dict[tuple[NodeAddr, NodeAddr], LatencyModel] = {}
        self._manual_spikes: dict[tuple[NodeAddr, NodeAddr], list[tuple[int, int, int]]] = {}
        self._auto_spikes: dict[tuple[NodeAddr, NodeAddr], tuple[list[int], list[tuple[int, int, int]]]] = {}
        self.sent: dict[tuple[NodeAddr, NodeAddr], int] = {}
        self.delivered_count: dict[tuple[NodeAddr, NodeAddr], int] = {}
        self.dropped_count: dict[tuple[NodeAddr, NodeAddr], int] = {}
        self.trace: list[tuple[int, NodeAddr, NodeAddr, int, int | None]] = []
        self.delivered: list[tuple[object, DeliveryInfo]] = []

    # -- registry ----------------------------------------------------------

    def register(self, addr: NodeAddr, profile: VmProfile | None = None) -> None:
        self.profiles[addr] = profile or VmProfile()

    def set_link_latency(self, src: NodeAddr, dst: NodeAddr, model: LatencyModel) -> None:
        self._link_latency[(src, dst)] = model

    def _require(self, addr: NodeAddr) -> VmProfile:
        prof = self.profiles.get(addr)
        if prof is None:
            raise ConfigError(f"unregistered node {addr}")
        return prof

    # -- spikes ------------------------------------------------------------

    def inject_spike(
        self,
        link: tuple[NodeAddr, NodeAddr],
        at_ns: int,
        magnitude_us: float,
        duration_ms: float,
    ) -> None:
        mag = int(round(magnitude_us * NS_PER_US))
        dur = int(round(duration_ms * NS_PER_MS))
        self._manual_spikes.setdefault(link, []).append((at_ns, at_ns + dur, mag))

    def _auto_spike_windows(self, link) -> tuple[list[int], list[tuple[int, int, int]]]:
        cached = self._auto_spikes.get(link)
        if cached is not None:
            return cached
        model = self._link_latency.get(link, self.latency)
        starts: list[int] = []
        windows: list[tuple[int, int, int]] = []
        if model.spike_rate_per_s > 0:
            mean_gap = NS_PER_S / model.spike_rate_per_s
            dur = int(round(model.spike_duration_ms * NS_PER_MS))
            src, dst = link
            t = 0
            k = 0
            while True:
                h = hash64(self.seed, DOM_SPIKE_ON, *src.key(), *dst.key(), k)
                gap = -mean_gap * math.log(1.0 - u01(h))
                t += max(1, int(round(gap)))
                if t > self.horizon_ns:
                    break
                hm = hash64(self.seed, DOM_SPIKE_MAG, *src.key(), *dst.key(), k)
                mag_us = -model.spike_magnitude_us * math.log(1.0 - u01(hm))
                windows.append((t, t + dur, int(round(mag_us * NS_PER_US))))
                starts.append(t)
                k += 1
        self._auto_spikes[link] = (starts, windows)
        return starts, windows

    def _spike_extra(self, link, at_ns: int) -> int:
        extra = 0
        for s, e, mag in self._manual_spikes.get(link, ()):
            if s <= at_ns < e:
                extra += mag
        starts, windows = self._auto_spike_windows(link)
        if windows:
            model = self._link_latency.get(link, self.latency)
            dur = int(round(model.spike_duration_ms * NS_PER_MS))
            i = bisect.bisect_right(starts, at_ns)
            j = i - 1
            # only windows starting within one duration of at_ns can cover it
            while j >= 0 and windows[j][0] > at_ns - dur - 1:
                s, e, mag = windows[j]
                if s <= at_ns < e:
                    extra += mag
                j -= 1
        return extra

    # -- delay sampling ----------------------------------------------------

    def link_delay_ns(
        self, src: NodeAddr, dst: NodeAddr, msg_id: int, copy: int, attempt: int, at_ns: int
    ) -> int:
        model = self._link_latency.get((src, dst), self.latency)
        h = hash64(self.seed, DOM_LINK, *src.key(), *dst.key(), msg_id, copy, attempt)
        delay = model.base_ns() + model.jitter_ns(h) + self._spike_extra((src, dst), at_ns)
        delay = delay * self._require(src).factor_milli() // 1000
        delay = delay * self._require(dst).factor_milli() // 1000
        return delay

    # -- event loop --------------------------------------------------------

    def schedule(self, at_ns: int, fn) -> None:
        heapq.heappush(self._events, (at_ns, self._eseq, fn))
        self._eseq += 1

    def run_until(self, t_ns: int) -> int:
        n = 0
        while self._events and self._events[0][0] <= t_ns:
            at, _, fn = heapq.heappop(self._events)
            self.now = at
            fn()
            n += 1
        self.now = max(self.now, t_ns)
        return n

    def run(self) -> int:
        n = 0
        while self._events:
            at, _, fn = heapq.heappop(self._events)
            self.now = at
            fn()
            n += 1
        return n

    # -- send path ---------------------------------------------------------

    def send(
        self,
        src: NodeAddr,
        dst: NodeAddr,
        size_bytes: int,
        msg_id: int,
        copy: int = 0,
        attempt: int = 0,
        payload: object = None,
        on_deliver=None,
        on_drop=None,
    ) -> int:
        """Queue one packet on src's egress now; returns the departure time."""
        src_prof = self._require(src)
        dst_prof = self._require(dst)
        departure = max(self.now, self._egress_free.get(src, 0))
        tx = tx_ns(size_bytes, src_prof.egress_gbps)
        self._egress_free[src] = departure + tx
        delay = self.link_delay_ns(src, dst, msg_id, copy, attempt, departure)
        arrival = departure + tx + delay
        pair = (src, dst)
        self.sent[pair] = self.sent.get(pair, 0) + 1

        def on_arrival():
            ingress = self._ingress.get(dst)
            if ingress is None:
                ingress = _Ingress(dst_prof.ingress_queue_pkts)
                self._ingress[dst] = ingress
            end = ingress.admit(self.now, dst_prof.proc_ns())
            if end is None:
                self.dropped_count[pair] = self.dropped_count.get(pair, 0) + 1
                if self.keep_trace:
                    self.trace.append((msg_id, src, dst, departure, None))
                if on_drop is not None:
                    on_drop(msg_id, self.now)
                return
            info = DeliveryInfo(msg_id, src, dst, departure, end, copy, attempt)
            self.delivered_count[pair] = self.delivered_count.get(pair, 0) + 1
            if self.keep_trace:
                self.trace.append((msg_id, src, dst, departure, end))
            if end == self.now:
                self._deliver(payload, info, on_deliver)
            else:
                self.schedule(end, lambda: self._deliver(payload, info, on_deliver))

        self.schedule(arrival, on_arrival)
        return departure

    def _deliver(self, payload, info: DeliveryInfo, on_deliver) -> None:
        if on_deliver is not None:
            on_deliver(payload, info)
        else:
            self.delivered.append((payload, info))

    # -- audits ------------------------------------------------------------

    def conservation_ok(self) -> bool:
        pairs = set(self.sent) | set(self.delivered_count) | set(self.dropped_count)
        return all(
            self.sent.get(p, 0)
            == self.delivered_count.get(p, 0) + self.dropped_count.get(p, 0)
            for p in pairs
        )

    def total_dropped(self) -> int:
        return sum(self.dropped_count.values())


class ReliableChannel:
    """FIFO delivery over lossy ingress: timeout retransmit, in-order release.

    No acknowledgement traffic is modeled; the sender's timer consults the
    delivery record directly, which a deterministic simulation makes exact.
    """

    def __init__(self, sim: Netsim, src: NodeAddr, dst: NodeAddr, retto_ns: int, on_release):
        self.sim = sim
        self.src = src
        self.dst = dst
        self.retto_ns = retto_ns
        self.on_release = on_release
        self._next_seq = 0
        self._next_release = 0
        self._delivered: set[int] = set()
        self._buffer: dict[int, object] = {}
        self.retransmits = 0

    def send(self, payload: object, size_bytes: int, msg_id: int) -> int:
        seq = self._next_seq
        self._next_seq += 1
        self._attempt(payload, size_bytes, msg_id, seq, attempt=0)
        return seq

    def _attempt(self, payload, size_bytes, msg_id, seq, attempt):
        def on_deliver(pl, info):
            if seq in self._delivered:
                return
            self._delivered.add(seq)
            self._buffer[seq] = pl
            while self._next_release in self._buffer:
                self.on_release(self._buffer.pop(self._next_release), info)
                self._next_release += 1

        departure = self.sim.send(
            self.src,
            self.dst,
            size_bytes,
            msg_id,
            copy=0,
            attempt=attempt,
            payload=payload,
            on_deliver=on_deliver,
        )

        def timer():
            if seq not in self._delivered:
                self.retransmits += 1
                self._attempt(payload, size_bytes, msg_id, seq, attempt + 1)

        self.sim.schedule(departure + self.retto_ns, timer)


def dump_net_trace_csv(path: str, trace) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["msg_id", "src_layer", "src_index", "dst_layer", "dst_index", "sent_ns", "delivered_ns"])
        for msg_id, src, dst, sent_ns, delivered_ns in trace:
            w.writerow(
                [
                    msg_id,
                    src.layer,
                    src.index,
                    dst.layer,
                    dst.index,
                    sent_ns,
                    "DROP" if delivered_ns is None else delivered_ns,
                ]
            )
