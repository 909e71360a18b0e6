"""Inbound order path: gateways -> proxy pipelines -> root sequencer -> engine.

The multicast tree is reused in the reverse direction with static parents
(no rotation), so the root's fan-in is the fanout F rather than the MP count.
Each gateway stamps orders monotonically on its own clock and queues them in
a local LOQ; each proxy runs a sequencer over its children, re-queues the
released orders in its own LOQ, and forwards upstream over a reliable FIFO
channel, optionally paced. Proxies discard incoming dummy orders and
regenerate their own when idle, carrying a watermark gen_ts that no later
real order from that proxy's subtree can undercut. The root sequencer merges
the top-layer streams and feeds the matching engine directly.

Queue modes: "loq" uses (epoch, criticality, gen_ts, mp) priority; "fifo"
forwards in arrival order, which keeps every stream timestamp-sorted and
serves as the baseline scheduler.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

from .core import (
    ASK,
    BID,
    NS_PER_MS,
    NS_PER_US,
    ROOT,
    ConfigError,
    NodeAddr,
    Order,
    VmClock,
    sample_clock_offset,
    stamp_monotone,
    tx_ns,
)
from .engine import MatchingEngine, Trade
from .loq import LoqState
from .netsim import LatencyModel, Netsim, ReliableChannel, VmProfile
from .sequencer import HeartbeatState, Sequencer
from .tree import TreePlan, parent_index, plan_tree

# -- pacing ------------------------------------------------------------------

PACE_BAND_NS = 10 * NS_PER_US
PACE_UP_NS = 20 * NS_PER_US
PACE_DOWN_NS = 10 * NS_PER_US


@dataclass
class PacerState:
    """Inter-packet gap controller driven by the trailing median OWD."""

    target_ns: int
    quantum_ns: int = 0
    samples: list[int] = field(default_factory=list)
    history: list[tuple[int, int, int]] = field(default_factory=list)  # (t, e, quantum)


def median_ns(samples: list[int]) -> int:
    """Lower median of the sample window."""
    s = sorted(samples)
    return s[(len(s) - 1) // 2]


def pace_step(state: PacerState, estimate_ns: int) -> int:
    """One control step: widen the gap above the band, narrow it below.

    estimate >= target + 10us -> quantum += 20us
    estimate <= target - 10us -> quantum = max(0, quantum - 10us)
    otherwise unchanged.
    """
    if estimate_ns >= state.target_ns + PACE_BAND_NS:
        state.quantum_ns += PACE_UP_NS
    elif estimate_ns <= state.target_ns - PACE_BAND_NS:
        state.quantum_ns = max(0, state.quantum_ns - PACE_DOWN_NS)
    return state.quantum_ns


# -- queue modes -------------------------------------------------------------


@dataclass
class FifoQueue:
    """Arrival-order queue with the same surface as LoqState."""

    current_m: int = 0
    current_epoch: int = 0
    _q: list[Order] = field(default_factory=list)
    _head: int = 0
    enqueued_count: int = 0
    dequeued_count: int = 0
    epoch_skew_count: int = 0

    def on_mid_price(self, m_new: int) -> None:
        if m_new != self.current_m:
            self.current_m = m_new
            self.current_epoch += 1

    def observe(self, m_new: int, epoch_hint: int | None = None) -> None:
        self.on_mid_price(m_new)
        if epoch_hint is not None and epoch_hint != self.current_epoch:
            self.epoch_skew_count += 1

    def enqueue(self, order: Order) -> None:
        self._q.append(order)
        self.enqueued_count += 1

    def dequeue(self) -> Order | None:
        if self._head >= len(self._q):
            return None
        o = self._q[self._head]
        self._head += 1
        self.dequeued_count += 1
        if self._head > 256 and self._head * 2 > len(self._q):
            del self._q[: self._head]
            self._head = 0
        return o

    def __len__(self) -> int:
        return len(self._q) - self._head

    def min_pending_gen_ts(self) -> int | None:
        if self._head >= len(self._q):
            return None
        return min(o.gen_ts for o in self._q[self._head :])


QUEUE_MODES = ("loq", "fifo")


def make_queue(mode: str, w: int | None, m0: int):
    if mode == "loq":
        return LoqState(w=w, current_m=m0)
    if mode == "fifo":
        return FifoQueue(current_m=m0)
    raise ConfigError(f"queue_mode must be one of {QUEUE_MODES}, got {mode!r}")


# -- parameters --------------------------------------------------------------


@dataclass(frozen=True)
class InboundParams:
    n_mps: int
    seed: int = 1
    use_tree: bool = True
    fanout_override: int | None = None
    depth_override: int | None = None
    use_sequencer: bool = True
    queue_mode: str = "loq"
    w: int | None = 2
    initial_mid: int = 100
    epoch_script: tuple[tuple[int, int], ...] = ()  # (true_ns, m) applied everywhere
    closed_loop: bool = False
    md_delay_us: float = 5.0
    clock_err_ns: int = 0
    heartbeat_period_us: float = 200.0
    pacing: bool = False
    pace_target_us: float = 50.0
    pace_window_ms: float = 50.0
    order_bytes: int = 128
    retto_us: float = 200.0
    latency: LatencyModel = LatencyModel()
    gateway_profile: VmProfile = VmProfile()
    proxy_profile: VmProfile = VmProfile()
    root_profile: VmProfile = VmProfile()
    drain_slack_ms: float = 20.0
    horizon_ms: float | None = None
    keep_net_trace: bool = False

    def build_plan(self) -> TreePlan:
        if self.n_mps < 1:
            raise ConfigError(f"n_mps must be >= 1, got {self.n_mps}")
        if not self.use_tree:
            return TreePlan(self.n_mps, self.n_mps, 1, 0)
        if self.fanout_override is not None or self.depth_override is not None:
            base = plan_tree(self.n_mps, 0)
            return TreePlan(
                self.n_mps,
                self.fanout_override or base.fanout,
                self.depth_override or base.depth,
                0,
            )
        return plan_tree(self.n_mps, 0)


@dataclass(frozen=True)
class ArrivalRow:
    mp: int
    gen_ts: int
    side: int
    price: int
    qty: int
    arrival_ns: int


# -- node actors -------------------------------------------------------------


class _Forwarder:
    """Shared upstream half of a gateway or proxy: queue -> pace -> channel.

    Backlog is held in the queue, not the NIC: at most one packet is handed
    to the egress per transmit slot (mirrored locally), so queue priority
    decides what crosses a congested uplink next. Retransmissions bypass the
    mirror; they are rare enough that the one-packet bound stays approximate
    only under loss.
    """

    def __init__(self, run: "InboundRun", addr: NodeAddr, parent: NodeAddr, profile: VmProfile):
        self.run = run
        self.sim = run.sim
        self.addr = addr
        self.parent = parent
        p = run.params
        self.queue = make_queue(p.queue_mode, p.w, p.initial_mid)
        self.pacer = PacerState(target_ns=int(round(p.pace_target_us * NS_PER_US)))
        self.hb = HeartbeatState(mp=-1, period_ns=int(round(p.heartbeat_period_us * NS_PER_US)))
        self.channel: ReliableChannel | None = None  # wired by InboundRun
        self._tx_ns = tx_ns(p.order_bytes, profile.egress_gbps)
        self._egress_free = 0
        self._next_send_ns = 0
        self._pump_armed = False
        self._msg_seq = 0

    def _send(self, order: Order) -> None:
        now = self.sim.now
        self.channel.send((order, now), self.run.params.order_bytes, self._msg_seq)
        self._msg_seq += 1
        self.hb.note_activity(now)
        departure = max(now, self._egress_free)
        self._egress_free = departure + self._tx_ns
        self._next_send_ns = max(departure + self.pacer.quantum_ns, self._egress_free)

    def kick(self) -> None:
        if self._pump_armed or len(self.queue) == 0:
            return
        self._pump_armed = True
        self.sim.schedule(max(self.sim.now, self._next_send_ns), self._pump)

    def _pump(self) -> None:
        self._pump_armed = False
        if len(self.queue) == 0:
            return
        if self.sim.now < self._next_send_ns:
            self._pump_armed = True
            self.sim.schedule(self._next_send_ns, self._pump)
            return
        order = self.queue.dequeue()
        self._send(order)
        self.kick()

    def pace_sample(self, owd_ns: int) -> None:
        self.pacer.samples.append(owd_ns)

    def pace_tick(self) -> None:
        if self.pacer.samples:
            e = median_ns(self.pacer.samples)
            pace_step(self.pacer, e)
            self.pacer.history.append((self.sim.now, e, self.pacer.quantum_ns))
            self.pacer.samples.clear()
        window = int(round(self.run.params.pace_window_ms * NS_PER_MS))
        self.sim.schedule(self.sim.now + window, self.pace_tick)

    def heartbeat_tick(self) -> None:
        if len(self.queue) == 0:
            probe = self.hb.maybe_emit(self.sim.now)
            if probe is not None:
                self._send(self._make_dummy())
        period = self.hb.period_ns
        self.sim.schedule(self.sim.now + period, self.heartbeat_tick)

    def _make_dummy(self) -> Order:
        raise NotImplementedError


class Gateway(_Forwarder):
    """One MP's edge node: stamps, classifies, queues, forwards, heartbeats."""

    def __init__(self, run: "InboundRun", mp: int, addr: NodeAddr, parent: NodeAddr,
                 profile: VmProfile):
        super().__init__(run, addr, parent, profile)
        self.mp = mp
        self.clock = VmClock(sample_clock_offset(run.params.seed, addr, run.params.clock_err_ns))
        self._last_stamp = 0

    def _stamp(self) -> int:
        s = stamp_monotone(self.clock.read(self.sim.now), self._last_stamp)
        self._last_stamp = s
        return s

    def on_order(self, spec: Order) -> None:
        order = replace(spec, mp=self.mp, gen_ts=self._stamp())
        self.run.submitted.append(order)
        self.queue.enqueue(order)
        self.kick()

    def _make_dummy(self) -> Order:
        return Order(mp=self.mp, gen_ts=self._stamp(), is_dummy=True)


class Proxy(_Forwarder):
    """Interior node: sequencer over its children, then queue and forward."""

    def __init__(self, run: "InboundRun", addr: NodeAddr, parent: NodeAddr, n_children: int,
                 profile: VmProfile):
        super().__init__(run, addr, parent, profile)
        self.seq = Sequencer(n_children, keep_trace=False) if run.params.use_sequencer else None
        self.n_children = n_children
        self.child_watermark = [-1] * n_children

    def on_from_child(self, slot: int, order: Order) -> None:
        self.child_watermark[slot] = max(self.child_watermark[slot], order.gen_ts)
        if self.seq is None:
            if not order.is_dummy:
                self.queue.enqueue(order)
                self.kick()
            return
        self.seq.enqueue(order, slot)
        released = self.seq.drain()
        for o in released:
            self.queue.enqueue(o)
        if released:
            self.kick()

    def _watermark(self) -> int:
        """A gen_ts no later real order forwarded from here can undercut."""
        vals = list(self.child_watermark)
        if self.seq is not None:
            for q in self.seq.queues:
                vals.extend(o.gen_ts - 1 for o in q)
        pending = self.queue.min_pending_gen_ts()
        if pending is not None:
            vals.append(pending - 1)
        return min(vals)

    def _make_dummy(self) -> Order:
        return Order(mp=-1, gen_ts=self._watermark(), is_dummy=True)


class RootNode:
    """Top of the reverse tree: final sequencer feeding the matching engine."""

    def __init__(self, run: "InboundRun", n_children: int):
        self.run = run
        self.seq = Sequencer(n_children, keep_trace=False) if run.params.use_sequencer else None
        self.n_children = n_children
        self.dummies_discarded = 0

    def on_from_child(self, slot: int, order: Order) -> None:
        if self.seq is None:
            if order.is_dummy:
                self.dummies_discarded += 1
            else:
                self.run.engine_arrival(order)
            return
        self.seq.enqueue(order, slot)
        for o in self.seq.drain():
            self.run.engine_arrival(o)
        self.dummies_discarded = self.seq.discarded_count


# -- the run -----------------------------------------------------------------


@dataclass
class InboundResult:
    params: InboundParams
    plan: TreePlan
    trades: list[Trade]
    arrivals: list[ArrivalRow]
    submitted: list[Order]
    first_fill_ns: dict[tuple[int, int], int]
    root_fan_in: int
    root_dummies_discarded: int
    drops: int
    retransmits: int
    epoch_skew: int
    undelivered: int
    horizon_ns: int
    pacer_final_quantum_ns: dict[tuple[int, int], int]
    pacer_history: dict[tuple[int, int], list[tuple[int, int, int]]]

    def order_latency_rows(self) -> list[tuple[int, int, int, int | None]]:
        """(mp, gen_ts, engine_arrival_ns, matched_ns or None) per real order."""
        rows = []
        for a in self.arrivals:
            rows.append((a.mp, a.gen_ts, a.arrival_ns, self.first_fill_ns.get((a.gen_ts, a.mp))))
        return rows

    def matching_rate_series(self, window_us: float) -> list[tuple[int, int, int]]:
        """(window_start_ns, orders_received, orders_matched) over the run."""
        win = int(round(window_us * NS_PER_US))
        if win <= 0:
            raise ConfigError(f"window_us must be positive, got {window_us}")
        n_win = self.horizon_ns // win + 1
        received = [0] * n_win
        matched = [0] * n_win
        for a in self.arrivals:
            received[min(a.arrival_ns // win, n_win - 1)] += 1
        for t_ns in self.first_fill_ns.values():
            matched[min(t_ns // win, n_win - 1)] += 1
        return [(i * win, received[i], matched[i]) for i in range(n_win)]


class InboundRun:
    def __init__(self, params: InboundParams, workload: list[Order]):
        self.params = params
        self.workload = workload
        self.plan = params.build_plan()
        self.sim = Netsim(seed=params.seed, keep_trace=params.keep_net_trace)
        self.engine = MatchingEngine(initial_mid=params.initial_mid)
        self.submitted: list[Order] = []
        self.arrivals: list[ArrivalRow] = []
        self.first_fill_ns: dict[tuple[int, int], int] = {}
        self._md_cursor = 0
        self._build_topology()

    # -- construction --------------------------------------------------------

    def _active_per_layer(self) -> list[int]:
        plan = self.plan
        counts = [0] * plan.depth
        counts[plan.leaf_layer] = plan.n_receivers
        for layer in range(plan.leaf_layer - 1, -1, -1):
            counts[layer] = -(-counts[layer + 1] // plan.fanout)
        return counts

    def _build_topology(self) -> None:
        p, plan, sim = self.params, self.plan, self.sim
        active = self._active_per_layer()
        sim.register(ROOT, p.root_profile)
        self.nodes: dict[NodeAddr, _Forwarder] = {}
        self.gateways: list[Gateway] = []
        leaf = plan.leaf_layer
        for layer in range(plan.depth):
            profile = p.gateway_profile if layer == leaf else p.proxy_profile
            for idx in range(active[layer]):
                addr = NodeAddr(layer, idx)
                sim.register(addr, profile)
                pi = parent_index(plan, layer, idx, 0, rotate=False)
                parent = ROOT if pi < 0 else NodeAddr(layer - 1, pi)
                if layer == leaf:
                    gw = Gateway(self, idx, addr, parent, profile)
                    self.nodes[addr] = gw
                    self.gateways.append(gw)
                else:
                    kids = min(plan.fanout, active[layer + 1] - idx * plan.fanout)
                    self.nodes[addr] = Proxy(self, addr, parent, kids, profile)
        root_kids = active[0]
        self.root = RootNode(self, root_kids)
        for addr, node in self.nodes.items():
            slot = addr.index % plan.fanout
            if node.parent == ROOT:
                slot = addr.index
                sink = self.root
            else:
                sink = self.nodes[node.parent]
            node.channel = ReliableChannel(
                sim,
                addr,
                node.parent,
                retto_ns=int(round(p.retto_us * NS_PER_US)),
                on_release=self._make_release(node, sink, slot),
            )

    def _make_release(self, sender: _Forwarder, sink, slot: int):
        def on_release(payload, info):
            order, send_ns = payload
            if self.params.pacing:
                sender.pace_sample(self.sim.now - send_ns)
            sink.on_from_child(slot, order)

        return on_release

    # -- engine side ---------------------------------------------------------

    def engine_arrival(self, order: Order) -> None:
        now = self.sim.now
        self.arrivals.append(
            ArrivalRow(order.mp, order.gen_ts, order.side, order.price, order.qty, now)
        )
        trades = self.engine.submit(order, exec_ts=now)
        for t in trades:
            for key in (t.bid_key, t.ask_key):
                self.first_fill_ns.setdefault(key, t.exec_ts)
        if self.params.closed_loop:
            self._broadcast_md()

    def _broadcast_md(self) -> None:
        events = self.engine.md_events
        if self._md_cursor >= len(events):
            return
        ev = events[-1]
        self._md_cursor = len(events)
        delay = int(round(self.params.md_delay_us * NS_PER_US))

        def apply():
            for node in self.nodes.values():
                node.queue.observe(ev.m, ev.epoch)

        self.sim.schedule(self.sim.now + delay, apply)

    # -- schedule and run ----------------------------------------------------

    def _apply_script_entry(self, m: int) -> None:
        for node in self.nodes.values():
            node.queue.on_mid_price(m)

    def run(self) -> InboundResult:
        p, sim = self.params, self.sim
        for t_ns, m in p.epoch_script:
            sim.schedule(t_ns, lambda m=m: self._apply_script_entry(m))
        last_t = 0
        for spec in self.workload:
            if not 0 <= spec.mp < p.n_mps:
                raise ConfigError(f"workload mp {spec.mp} out of range [0, {p.n_mps})")
            last_t = max(last_t, spec.gen_ts)
            gw = self.gateways[spec.mp]
            sim.schedule(spec.gen_ts, lambda gw=gw, spec=spec: gw.on_order(spec))
        period = int(round(p.heartbeat_period_us * NS_PER_US))
        for node in self.nodes.values():
            sim.schedule(period, node.heartbeat_tick)
            if p.pacing:
                window = int(round(p.pace_window_ms * NS_PER_MS))
                sim.schedule(window, node.pace_tick)
        if p.horizon_ms is not None:
            horizon = int(round(p.horizon_ms * NS_PER_MS))
        else:
            horizon = last_t + int(round(p.drain_slack_ms * NS_PER_MS))
        sim.run_until(horizon)
        return self._collect(horizon)

    def _collect(self, horizon: int) -> InboundResult:
        skew = sum(n.queue.epoch_skew_count for n in self.nodes.values())
        retx = sum(n.channel.retransmits for n in self.nodes.values())
        quanta = {
            (a.layer, a.index): n.pacer.quantum_ns for a, n in self.nodes.items()
        }
        history = {
            (a.layer, a.index): n.pacer.history for a, n in self.nodes.items() if n.pacer.history
        }
        return InboundResult(
            params=self.params,
            plan=self.plan,
            trades=list(self.engine.trades),
            arrivals=self.arrivals,
            submitted=self.submitted,
            first_fill_ns=self.first_fill_ns,
            root_fan_in=self.root.n_children,
            root_dummies_discarded=self.root.dummies_discarded,
            drops=self.sim.total_dropped(),
            retransmits=retx,
            epoch_skew=skew,
            undelivered=len(self.submitted) - len(self.arrivals),
            horizon_ns=horizon,
            pacer_final_quantum_ns=quanta,
            pacer_history=history,
        )


def run_inbound(params: InboundParams, workload: list[Order]) -> InboundResult:
    return InboundRun(params, workload).run()


# -- fairness oracle ---------------------------------------------------------


@dataclass(frozen=True)
class FairnessReport:
    ok: bool
    n_pipeline_trades: int
    n_reference_trades: int
    first_divergence: int | None  # exec_seq of the first differing trade

    def detail(self) -> str:
        if self.ok:
            return f"identical trade sequences ({self.n_pipeline_trades} trades)"
        return (
            f"diverges at exec_seq {self.first_divergence} "
            f"(pipeline {self.n_pipeline_trades}, reference {self.n_reference_trades} trades)"
        )


def reference_trades(submitted: list[Order], initial_mid: int) -> list[tuple[int, int, int, int]]:
    """Trades from a fresh engine fed all real orders sorted by (gen_ts, mp)."""
    eng = MatchingEngine(initial_mid=initial_mid)
    for o in sorted(submitted, key=lambda o: o.key()):
        eng.submit(o)
    return [t.essence() for t in eng.trades]


def fairness_oracle(result: InboundResult) -> FairnessReport:
    ref = reference_trades(result.submitted, result.params.initial_mid)
    got = [t.essence() for t in result.trades]
    if got == ref:
        return FairnessReport(True, len(got), len(ref), None)
    div = next(
        (i for i, (a, b) in enumerate(zip(got, ref)) if a != b), min(len(got), len(ref))
    )
    return FairnessReport(False, len(got), len(ref), div)


# -- unfairness metric -------------------------------------------------------


@dataclass(frozen=True)
class UnfairnessReport:
    unfair_count: int
    matched_count: int

    @property
    def ratio(self) -> float:
        if self.matched_count == 0:
            return 0.0
        return self.unfair_count / self.matched_count


def unfairness_ratio(arrivals: list[ArrivalRow], trades: list[Trade]) -> UnfairnessReport:
    """An arrival is unfair when a later-stamped order at its price and side
    was already matched before it arrived. Ratio is over matched orders."""
    by_key = {(a.gen_ts, a.mp): a for a in arrivals}
    fills: dict[tuple[int, int], list[tuple[int, int]]] = {}
    matched_keys = set()
    for t in trades:
        for key, side in ((t.bid_key, BID), (t.ask_key, ASK)):
            matched_keys.add(key)
            o = by_key[key]
            fills.setdefault((side, o.price), []).append((t.exec_ts, o.gen_ts))
    unfair = 0
    for a in arrivals:
        group = fills.get((a.side, a.price), ())
        if any(ts < a.arrival_ns and gen > a.gen_ts for ts, gen in group):
            unfair += 1
    return UnfairnessReport(unfair, len(matched_keys))


# -- CSV interfaces ----------------------------------------------------------


def dump_order_latency_csv(path: str, result: InboundResult) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["mp", "gen_ts", "engine_arrival_ns", "matched_ns"])
        for mp, gen_ts, arrival, matched in result.order_latency_rows():
            w.writerow([mp, gen_ts, arrival, "UNMATCHED" if matched is None else matched])


def dump_matching_rate_csv(path: str, result: InboundResult, window_us: float = 1000.0) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["window_start_ns", "orders_received", "orders_matched"])
        for row in result.matching_rate_series(window_us):
            w.writerow(row)
