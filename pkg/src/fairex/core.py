"""Shared domain types: time, identifiers, orders, messages, clocks.

All timestamps are integer nanoseconds since simulation epoch 0. Prices and
quantities are integer ticks/lots. Every cross-module ordering question is
settled by the strict total order (gen_ts, mp) over orders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import rng

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

BID = 0
ASK = 1

SIDE_NAMES = {BID: "bid", ASK: "ask"}


class ConfigError(Exception):
    """Invalid configuration value; carries the offending key in its message."""


@dataclass(frozen=True, order=True)
class NodeAddr:
    """Position in the overlay: (layer, index).

    layer -1 is the root/sender; layers 0..D-2 are proxies; layer D-1 holds
    the receiver leaves. index is the slot within the layer.
    """

    layer: int
    index: int

    def key(self) -> tuple[int, int]:
        # Hash key component; +1 keeps the root non-negative.
        return (self.layer + 1, self.index)


ROOT = NodeAddr(-1, 0)


@dataclass
class MulticastMessage:
    """One market-data datum traveling down the tree."""

    msg_id: int
    send_ts: int
    deadline: int = 0  # 0 = unset
    size_bytes: int = 466

    def __post_init__(self) -> None:
        if self.deadline and self.deadline < self.send_ts:
            raise ValueError("deadline before send_ts")


@dataclass(frozen=True)
class Order:
    """A bid/ask. (gen_ts, mp) is globally unique and totally ordered."""

    mp: int
    gen_ts: int
    side: int = BID
    price: int = 0
    qty: int = 0
    is_dummy: bool = False
    epoch: int = 0

    def key(self) -> tuple[int, int]:
        return (self.gen_ts, self.mp)

    def validate(self) -> None:
        if not self.is_dummy and (self.price <= 0 or self.qty <= 0):
            raise ValueError(f"order {self.mp}@{self.gen_ts}: price/qty must be positive")


@dataclass
class VmClock:
    """Constant per-VM offset: reading = true time + offset."""

    offset_ns: int = 0

    def read(self, true_ns: int) -> int:
        return true_ns + self.offset_ns

    def to_true(self, local_ns: int) -> int:
        return local_ns - self.offset_ns


def sample_clock_offset(seed: int, addr: NodeAddr, err_ns: int) -> int:
    """Offset uniform on [-err_ns, +err_ns] (0 -> perfect clock).

    The default err_ns=100 keeps the 90th percentile of |offset| at <= 100 ns.
    """
    if err_ns <= 0:
        return 0
    h = rng.hash64(seed, rng.DOM_CLOCK, *addr.key())
    return rng.randint_span(h, -err_ns, err_ns)


def tx_ns(size_bytes: int, egress_gbps: float) -> int:
    """Serialization time of one packet, integer nanoseconds (truncating).

    1 Gbps == 1 bit/ns, so 466 B at 16 Gbps is exactly 233 ns.
    """
    bits_per_us = int(round(egress_gbps * 1000))
    if bits_per_us <= 0:
        raise ValueError("egress_gbps must be positive")
    return (size_bytes * 8 * 1000) // bits_per_us


def stamp_monotone(clock_local_ns: int, last_stamp: int) -> int:
    """Strictly monotone gateway stamping: never reuse or go backward."""
    return max(clock_local_ns, last_stamp + 1)
