"""Event-driven outbound multicast: root pump, proxy relay, leaf release.

The root paces messages at a fixed rate, stamping send timestamps and (when
hold-and-release is on) deadlines from the current global OWD. Proxies
forward on their first accepted copy of each message to their own rotated
children plus hedge targets; every node runs duplicate suppression. Leaves
record arrivals, hold to the deadline, and feed the OWD estimators whose
reports flow back up the static tree once per report period.

Receiver hedging doubles the leaf population: message slots 2i/2i+1 both
carry market participant i, whose effective arrival/release is the earlier
of the pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    NS_PER_MS,
    NS_PER_S,
    MulticastMessage,
    NodeAddr,
    ROOT,
    VmClock,
    sample_clock_offset,
)
from .hold_release import (
    GlobalOwd,
    MessageLatencyRow,
    MetricsSummary,
    OwdEstimator,
    ProxyAggregate,
    ReleaseGate,
    collect_message_metrics,
    summarize_rows,
)
from .netsim import LatencyModel, Netsim, VmProfile
from .tree import (
    ACCEPT,
    DedupBuffer,
    TreePlan,
    burst_targets,
    dedup_accept,
    du_plan,
    parent_index,
    plan_tree,
)


@dataclass
class OutboundParams:
    n_receivers: int
    seed: int = 1
    rate_msgs_s: int = 1000
    n_messages: int = 100
    hedge: int = 0
    rotate: bool = True  # RRPS on/off
    root_hedging: bool = True
    receiver_hedging: bool = False
    direct_unicast: bool = False  # depth-0 baseline
    fanout_override: int | None = None
    depth_override: int | None = None
    hold_release: bool = True
    margin_us: float = 0.0
    report_period_ms: float = 100.0
    initial_headroom_factor: int = 5
    clock_err_ns: int = 0
    size_bytes: int = 466
    latency: LatencyModel = field(default_factory=LatencyModel)
    proxy_profile: VmProfile = field(default_factory=VmProfile)
    leaf_profile: VmProfile = field(default_factory=VmProfile)
    root_profile: VmProfile = field(default_factory=VmProfile)
    keep_net_trace: bool = False

    def build_plan(self) -> TreePlan:
        n_slots = self.n_receivers * (2 if self.receiver_hedging else 1)
        if self.direct_unicast:
            return du_plan(n_slots)
        if self.fanout_override is not None or self.depth_override is not None:
            base = plan_tree(n_slots, self.hedge)
            return TreePlan(
                n_receivers=n_slots,
                fanout=self.fanout_override or base.fanout,
                depth=self.depth_override or base.depth,
                hedge=self.hedge,
            )
        return plan_tree(n_slots, self.hedge)


@dataclass
class OutboundResult:
    params: OutboundParams
    plan: TreePlan
    rows: list[MessageLatencyRow]
    summary: MetricsSummary
    copies: dict[tuple[NodeAddr, int], int]  # deliveries per (node, msg)
    sends_per_proxy_msg: dict[tuple[NodeAddr, int], int]
    dedup_violations: int
    total_drops: int
    delivery_rows: list[tuple[int, int, int, int]]  # msg, leaf, copies, first_arrival
    sim: Netsim

    def oml_by_msg(self) -> list[int]:
        return [r.oml_ns for r in self.rows]

    def dws_by_msg(self) -> list[int]:
        return [r.dws_ns for r in self.rows]


class OutboundRun:
    def __init__(self, params: OutboundParams):
        self.p = params
        self.plan = params.build_plan()
        self.sim = Netsim(
            seed=params.seed,
            latency=params.latency,
            horizon_ns=self._duration_ns() + NS_PER_S,
            keep_trace=params.keep_net_trace,
        )
        self.clocks: dict[NodeAddr, VmClock] = {}
        self.dedup: dict[NodeAddr, DedupBuffer] = {}
        self.gates: dict[NodeAddr, ReleaseGate] = {}
        self.estimators: dict[NodeAddr, OwdEstimator] = {}
        self.aggregates: dict[NodeAddr, ProxyAggregate] = {}
        self.copies: dict[tuple[NodeAddr, int], int] = {}
        self.sends_per_proxy_msg: dict[tuple[NodeAddr, int], int] = {}
        self.arrivals: dict[int, dict[int, int]] = {}  # msg -> slot -> true ns
        self.releases: dict[int, dict[int, int]] = {}
        self.send_true: dict[int, int] = {}
        self.miss_count: dict[int, int] = {}
        self._setup()

    # -- construction ------------------------------------------------------

    def _duration_ns(self) -> int:
        gap = NS_PER_S // self.p.rate_msgs_s
        return self.p.n_messages * gap

    def _register(self, addr: NodeAddr, profile: VmProfile) -> None:
        self.sim.register(addr, profile)
        self.clocks[addr] = VmClock(
            sample_clock_offset(self.p.seed, addr, self.p.clock_err_ns)
        )
        self.dedup[addr] = DedupBuffer.for_rate(max(self.p.rate_msgs_s, 1))

    def _setup(self) -> None:
        p, plan = self.p, self.plan
        self._register(ROOT, p.root_profile)
        leaf_layer = plan.leaf_layer
        for layer in range(0, leaf_layer):
            for node in plan.nodes(layer):
                self._register(node, p.proxy_profile)
                self.aggregates[node] = ProxyAggregate()
        for node in plan.nodes(leaf_layer):
            self._register(node, p.leaf_profile)
            self.estimators[node] = OwdEstimator(report_period_ms=p.report_period_ms)
            self.gates[node] = ReleaseGate(self.clocks[node])
        self.owd_g = GlobalOwd(
            initial_headroom_ns=p.initial_headroom_factor * p.latency.base_ns()
        )

    # -- slots vs market participants ---------------------------------------

    def slot_mp(self, slot: int) -> int:
        return slot // 2 if self.p.receiver_hedging else slot

    # -- forwarding ---------------------------------------------------------

    def _send_burst(self, sender: NodeAddr, msg: MulticastMessage) -> None:
        root_copies = 1
        if sender == ROOT and self.plan.depth >= 1 and self.p.root_hedging:
            root_copies = self.plan.hedge + 1
        targets = burst_targets(
            self.plan, sender, msg.msg_id, rotate=self.p.rotate, root_copies=root_copies
        )
        if sender != ROOT:
            self.sends_per_proxy_msg[(sender, msg.msg_id)] = len(targets)
        for pkt_idx, dst in enumerate(targets):
            self.sim.send(
                dst=dst,
                src=sender,
                size_bytes=msg.size_bytes,
                msg_id=msg.msg_id,
                copy=pkt_idx,
                payload=msg,
                on_deliver=self._on_deliver,
            )

    def _on_deliver(self, msg: MulticastMessage, info) -> None:
        node = info.dst
        self.copies[(node, msg.msg_id)] = self.copies.get((node, msg.msg_id), 0) + 1
        outcome = dedup_accept(self.dedup[node], msg.msg_id)
        if outcome != ACCEPT:
            return
        if node.layer == self.plan.leaf_layer and node.index < self.plan.n_receivers:
            self._leaf_accept(node, msg, info.delivered_ns)
        else:
            self._send_burst(node, msg)

    def _leaf_accept(self, leaf: NodeAddr, msg: MulticastMessage, arrival_ns: int) -> None:
        slot = leaf.index
        self.arrivals.setdefault(msg.msg_id, {})[slot] = arrival_ns
        self.estimators[leaf].record(self.clocks[leaf], msg.send_ts, arrival_ns)
        if self.p.hold_release:
            gate = self.gates[leaf]
            before = gate.misses
            release = gate.release(msg, arrival_ns)
            if gate.misses > before:
                self.miss_count[msg.msg_id] = self.miss_count.get(msg.msg_id, 0) + 1
        else:
            release = arrival_ns
        self.releases.setdefault(msg.msg_id, {})[slot] = release

    # -- OWD all-reduce ------------------------------------------------------

    def _on_report_boundary(self) -> None:
        plan = self.plan
        now = self.sim.now
        leaf_layer = plan.leaf_layer
        if leaf_layer == 0:
            reports = []
            for leaf in plan.nodes(0):
                est = self.estimators.get(leaf)
                if est is not None:
                    r = est.report()
                    if r is not None:
                        reports.append(r)
            self.owd_g.update_from_reports(reports, now)
        else:
            reports = []
            for proxy in plan.nodes(0):
                r = self.aggregates[proxy].forward()
                if r is not None:
                    reports.append(r)
            self.owd_g.update_from_reports(reports, now)
            for layer in range(0, leaf_layer - 1):
                for child in plan.nodes(layer + 1):
                    parent_idx = parent_index(plan, child.layer, child.index, 0, rotate=False)
                    est = self.aggregates[child].forward()
                    self.aggregates[NodeAddr(layer, parent_idx)].absorb(est)
            for leaf in plan.nodes(leaf_layer):
                est = self.estimators.get(leaf)
                if est is None:
                    continue
                r = est.report()
                if r is not None:
                    parent_idx = parent_index(plan, leaf_layer, leaf.index, 0, rotate=False)
                    self.aggregates[NodeAddr(leaf_layer - 1, parent_idx)].absorb(r)

    # -- main loop -----------------------------------------------------------

    def run(self) -> OutboundResult:
        p = self.p
        gap = NS_PER_S // p.rate_msgs_s
        period = int(round(p.report_period_ms * NS_PER_MS))
        total = self._duration_ns()
        for k in range(1, total // period + 3):
            self.sim.schedule(k * period, self._on_report_boundary)
        margin_ns = int(round(p.margin_us * 1000))
        root_clock = self.clocks[ROOT]

        def pump(msg_id: int):
            now = self.sim.now
            send_ts = root_clock.read(now)
            deadline = send_ts  # placeholder; deadline >= send_ts required
            if p.hold_release:
                deadline = send_ts + self.owd_g.current() + margin_ns
            msg = MulticastMessage(
                msg_id=msg_id, send_ts=send_ts, deadline=deadline, size_bytes=p.size_bytes
            )
            self.send_true[msg_id] = now
            self._send_burst(ROOT, msg)

        for i in range(p.n_messages):
            self.sim.schedule(i * gap, lambda i=i: pump(i))
        self.sim.run()
        return self._collect()

    # -- metrics -------------------------------------------------------------

    def _collect(self) -> OutboundResult:
        p, plan = self.p, self.plan
        n_mps = p.n_receivers  # plan slots may be doubled; MPs are as configured
        rows: list[MessageLatencyRow] = []
        delivery_rows: list[tuple[int, int, int, int]] = []
        for msg_id in range(p.n_messages):
            arr = self.arrivals.get(msg_id, {})
            rel = self.releases.get(msg_id, {})
            mp_arr: dict[int, int] = {}
            mp_rel: dict[int, int] = {}
            for slot, a in arr.items():
                mp = self.slot_mp(slot)
                if mp not in mp_arr or a < mp_arr[mp]:
                    mp_arr[mp] = a
            for slot, r in rel.items():
                mp = self.slot_mp(slot)
                if mp not in mp_rel or r < mp_rel[mp]:
                    mp_rel[mp] = r
            if not mp_rel:
                continue
            rows.append(
                collect_message_metrics(
                    msg_id,
                    self.send_true[msg_id],
                    list(mp_rel.values()),
                    list(mp_arr.values()),
                    self.miss_count.get(msg_id, 0),
                    n_mps,
                )
            )
            leaf_layer = plan.leaf_layer
            for slot in sorted(arr):
                delivery_rows.append(
                    (
                        msg_id,
                        slot,
                        self.copies.get((NodeAddr(leaf_layer, slot), msg_id), 0),
                        arr[slot],
                    )
                )
        summary = summarize_rows(rows)
        return OutboundResult(
            params=p,
            plan=plan,
            rows=rows,
            summary=summary,
            copies=self.copies,
            sends_per_proxy_msg=self.sends_per_proxy_msg,
            dedup_violations=sum(b.violations for b in self.dedup.values()),
            total_drops=self.sim.total_dropped(),
            delivery_rows=delivery_rows,
            sim=self.sim,
        )


def run_outbound(params: OutboundParams) -> OutboundResult:
    return OutboundRun(params).run()
