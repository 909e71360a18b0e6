"""Network simulator tests: delivery formula, FIFO egress, drops, spikes."""

import pytest

from fairex.core import ConfigError, NodeAddr
from fairex.netsim import (
    JITTER_CONSTANT,
    JITTER_LOGNORMAL,
    JITTER_NONE,
    JITTER_UNIFORM,
    LatencyModel,
    Netsim,
    ReliableChannel,
    VmProfile,
)

A = NodeAddr(0, 0)
B = NodeAddr(0, 1)
C = NodeAddr(0, 2)
D = NodeAddr(1, 0)

FLAT_50US = LatencyModel(base_us=50.0, jitter_kind=JITTER_NONE)


def test_delivery_formula_flat():
    sim = Netsim(seed=1, latency=FLAT_50US)
    sim.register(A)
    sim.register(B)
    sim.send(A, B, size_bytes=466, msg_id=0)
    sim.run()
    (_, info), = sim.delivered
    assert info.sent_ns == 0
    assert info.delivered_ns == 233 + 50_000  # tx + base, proc 0


def test_egress_serialization_spacing():
    sim = Netsim(seed=1, latency=FLAT_50US)
    sim.register(A)
    sim.register(B)
    d0 = sim.send(A, B, 466, msg_id=0)
    d1 = sim.send(A, B, 466, msg_id=1)
    d2 = sim.send(A, B, 466, msg_id=2)
    assert (d1 - d0, d2 - d1) == (233, 233)
    sim.run()
    ends = sorted(info.delivered_ns for _, info in sim.delivered)
    assert ends == [50_233, 50_466, 50_699]


def test_ingress_capacity_drops():
    sim = Netsim(seed=1, latency=FLAT_50US)
    for n in (A, B, C):
        sim.register(n)
    sim.register(D, VmProfile(ingress_queue_pkts=1, proc_delay_us=10.0))
    for i, src in enumerate((A, B, C)):
        sim.send(src, D, 466, msg_id=i)
    sim.run()
    assert sim.total_dropped() == 2
    assert len(sim.delivered) == 1
    assert sim.conservation_ok()


def test_unlimited_ingress_never_drops():
    sim = Netsim(seed=1, latency=FLAT_50US)
    for n in (A, B, C):
        sim.register(n)
    sim.register(D, VmProfile(ingress_queue_pkts=0, proc_delay_us=10.0))
    for i, src in enumerate((A, B, C)):
        sim.send(src, D, 466, msg_id=i)
    sim.run()
    assert sim.total_dropped() == 0
    # serial service: completions spaced by proc time
    ends = sorted(info.delivered_ns for _, info in sim.delivered)
    assert ends[1] - ends[0] == 10_000 and ends[2] - ends[1] == 10_000


def test_run_until_semantics():
    sim = Netsim(seed=1)
    assert sim.run_until(10**6) == 0
    assert sim.now == 10**6
    fired = []
    sim.schedule(2 * 10**6, lambda: fired.append("first"))
    sim.schedule(2 * 10**6, lambda: fired.append("second"))
    sim.run_until(2 * 10**6)
    assert fired == ["first", "second"]


def test_unknown_node_rejected():
    sim = Netsim(seed=1)
    sim.register(A)
    with pytest.raises(ConfigError):
        sim.send(A, B, 466, msg_id=0)


def test_straggler_scales_link_delay_only():
    sim = Netsim(seed=1, latency=FLAT_50US)
    sim.register(A)
    sim.register(B, VmProfile(straggler_factor=1.5))
    sim.send(A, B, 466, msg_id=0)
    sim.run()
    (_, info), = sim.delivered
    assert info.delivered_ns == 233 + 75_000  # tx unscaled, delay x1.5


def test_determinism_identical_traces():
    def scenario():
        sim = Netsim(
            seed=7,
            latency=LatencyModel(base_us=30.0, jitter_kind=JITTER_LOGNORMAL),
        )
        for n in (A, B, C, D):
            sim.register(n)
        for i in range(50):
            sim.send((A, B, C)[i % 3], D, 466, msg_id=i)
        sim.run()
        return sim.trace

    assert scenario() == scenario()


def test_delay_never_below_base():
    model = LatencyModel(base_us=40.0, jitter_kind=JITTER_LOGNORMAL)
    sim = Netsim(seed=3, latency=model)
    sim.register(A)
    sim.register(B)
    for i in range(500):
        assert sim.link_delay_ns(A, B, i, 0, 0, 0) > 40_000


def test_uniform_jitter_bounds():
    model = LatencyModel(
        base_us=20.0, jitter_kind=JITTER_UNIFORM, jitter_lo_us=0.0, jitter_hi_us=60.0
    )
    sim = Netsim(seed=3, latency=model)
    sim.register(A)
    sim.register(B)
    samples = [sim.link_delay_ns(A, B, i, 0, 0, 0) for i in range(2000)]
    assert min(samples) >= 20_000
    assert max(samples) <= 80_000
    assert max(samples) - min(samples) > 30_000  # actually spreads


def test_constant_jitter():
    model = LatencyModel(base_us=20.0, jitter_kind=JITTER_CONSTANT, jitter_const_us=5.0)
    sim = Netsim(seed=3, latency=model)
    sim.register(A)
    sim.register(B)
    assert sim.link_delay_ns(A, B, 0, 0, 0, 0) == 25_000


def test_injected_spike_shifts_one_message():
    def run(with_spike):
        sim = Netsim(seed=1, latency=FLAT_50US)
        sim.register(A)
        sim.register(B)
        if with_spike:
            sim.inject_spike((A, B), at_ns=0, magnitude_us=100.0, duration_ms=0.001)
        sim.send(A, B, 466, msg_id=0)  # departs at 0, inside the window
        sim.schedule(5_000, lambda: sim.send(A, B, 466, msg_id=1))  # outside
        sim.run()
        return {info.msg_id: info.delivered_ns for _, info in sim.delivered}

    base = run(False)
    spiked = run(True)
    assert spiked[0] - base[0] == 100_000
    assert spiked[1] == base[1]


def test_zero_magnitude_spike_is_identity():
    def run(with_spike):
        sim = Netsim(seed=2, latency=LatencyModel(base_us=30.0))
        sim.register(A)
        sim.register(B)
        if with_spike:
            sim.inject_spike((A, B), at_ns=0, magnitude_us=0.0, duration_ms=5.0)
        for i in range(20):
            sim.send(A, B, 466, msg_id=i)
        sim.run()
        return sim.trace

    assert run(False) == run(True)


def test_spike_on_unused_link_no_effect():
    def run(with_spike):
        sim = Netsim(seed=2, latency=FLAT_50US)
        for n in (A, B, C):
            sim.register(n)
        if with_spike:
            sim.inject_spike((A, C), at_ns=0, magnitude_us=500.0, duration_ms=10.0)
        sim.send(A, B, 466, msg_id=0)
        sim.run()
        return sim.trace

    assert run(False) == run(True)


def test_background_spikes_deterministic_and_present():
    model = LatencyModel(
        base_us=50.0,
        jitter_kind=JITTER_NONE,
        spike_rate_per_s=200.0,
        spike_magnitude_us=80.0,
        spike_duration_ms=2.0,
    )

    def samples():
        sim = Netsim(seed=11, latency=model, horizon_ns=10**9)
        sim.register(A)
        sim.register(B)
        return [sim.link_delay_ns(A, B, i, 0, 0, i * 10**6) for i in range(1000)]

    s1, s2 = samples(), samples()
    assert s1 == s2
    inflated = sum(1 for v in s1 if v > 50_000)
    assert 0 < inflated < 1000


def test_reliable_channel_fifo_under_drops():
    sim = Netsim(seed=5, latency=FLAT_50US)
    sim.register(A)
    sim.register(D, VmProfile(ingress_queue_pkts=2, proc_delay_us=50.0))
    released = []
    ch = ReliableChannel(
        sim, A, D, retto_ns=2 * 50_000, on_release=lambda pl, info: released.append(pl)
    )
    for i in range(12):
        ch.send(payload=i, size_bytes=466, msg_id=i)
    sim.run()
    assert released == list(range(12))
    assert ch.retransmits > 0
    assert sim.conservation_ok()


def test_conservation_under_mixed_load():
    sim = Netsim(seed=9, latency=LatencyModel(base_us=20.0))
    for n in (A, B, C):
        sim.register(n)
    sim.register(D, VmProfile(ingress_queue_pkts=3, proc_delay_us=30.0))
    for i in range(60):
        sim.send((A, B, C)[i % 3], D, 466, msg_id=i)
    sim.run()
    assert sim.conservation_ok()
    assert sim.total_dropped() > 0
