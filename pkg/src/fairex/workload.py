"""Deterministic workload generation and canonical hashing.

All draws are keyed off (seed, domain, indices) so a workload is a pure
function of its parameters; regenerating it for a comparison run yields
byte-identical orders.
"""

from __future__ import annotations

import csv
import hashlib

from .core import ASK, BID, NS_PER_MS, Order
from .rng import DOM_WORKLOAD, hash64, randint_span


def random_orders(
    seed: int,
    n_orders: int,
    n_mps: int,
    price_lo: int = 95,
    price_hi: int = 105,
    qty_hi: int = 5,
    t0: int = 1_000_000,
    gap_ns: int = 1_000,
) -> list[Order]:
    """Random marketable-ish stream; gen_ts strictly increasing (distinct)."""
    orders: list[Order] = []
    t = t0
    for i in range(n_orders):
        t += 1 + randint_span(hash64(seed, DOM_WORKLOAD, 1, i), 0, gap_ns - 1)
        side = BID if hash64(seed, DOM_WORKLOAD, 2, i) & 1 == 0 else ASK
        price = randint_span(hash64(seed, DOM_WORKLOAD, 3, i), price_lo, price_hi)
        qty = randint_span(hash64(seed, DOM_WORKLOAD, 4, i), 1, qty_hi)
        mp = randint_span(hash64(seed, DOM_WORKLOAD, 5, i), 0, n_mps - 1)
        orders.append(Order(mp=mp, gen_ts=t, side=side, price=price, qty=qty))
    return orders


def engine_instance(seed: int, max_orders: int = 50, n_mps: int = 8) -> list[Order]:
    """One random matching-engine instance, up to max_orders orders."""
    n = randint_span(hash64(seed, DOM_WORKLOAD, 0, 0), 1, max_orders)
    return random_orders(seed, n, n_mps)


NON_CRITICAL_BID_PRICE = 1
NON_CRITICAL_ASK_PRICE = 1_000_000


def fairness_workload(
    seed: int,
    n_mps: int = 5,
    n_orders: int = 200,
    n_epochs: int = 3,
    initial_mid: int = 100,
    w: int = 2,
    critical_pct: int = 60,
    span_ms: float = 10.0,
) -> tuple[list[Order], tuple[tuple[int, int], ...], int]:
    """Orders plus a mid-price script with exact-trade-equality guarantees.

    Constraints that make the scheduled trade sequence provably equal to the
    timestamp-sorted reference: gen_ts are globally distinct; mid-price moves
    are scripted and observed by every node at the same instant; critical
    prices sit inside the intersection of every epoch's action window, so an
    order's criticality never flips mid-flight; non-critical prices are
    extreme enough to never cross anything. Returns (orders, script, m0).
    """
    mids = [initial_mid]
    for k in range(1, n_epochs):
        mids.append(initial_mid + (1 if k % 2 == 1 else 0))
    lo = max(mids) - w
    hi = min(mids) + w
    span_ns = int(span_ms * NS_PER_MS)
    bounds = [span_ns * k // n_epochs for k in range(n_epochs + 1)]
    script = tuple((bounds[k], mids[k]) for k in range(1, n_epochs))
    t0 = 100_000
    gap = max((span_ns - t0) // (n_orders + 1), 2)
    orders: list[Order] = []
    t = t0
    for i in range(n_orders):
        t += 1 + randint_span(hash64(seed, DOM_WORKLOAD, 10, i), 0, gap - 1)
        while any(abs(t - b) < 10_000 for b in bounds[1:-1]):
            t += 20_000
        side = BID if hash64(seed, DOM_WORKLOAD, 11, i) & 1 == 0 else ASK
        critical = randint_span(hash64(seed, DOM_WORKLOAD, 12, i), 1, 100) <= critical_pct
        if critical:
            price = randint_span(hash64(seed, DOM_WORKLOAD, 13, i), lo, hi)
        else:
            price = NON_CRITICAL_BID_PRICE if side == BID else NON_CRITICAL_ASK_PRICE
        qty = randint_span(hash64(seed, DOM_WORKLOAD, 14, i), 1, 3)
        mp = randint_span(hash64(seed, DOM_WORKLOAD, 15, i), 0, n_mps - 1)
        orders.append(Order(mp=mp, gen_ts=t, side=side, price=price, qty=qty))
    return orders, script, initial_mid


def burst_windows(
    duration_ms: float, period_ms: float, duty: float = 0.25, phase_ms: float = 0.0
) -> list[tuple[int, int]]:
    """Square-wave burst intervals [(start_ns, end_ns), ...] over the run."""
    out = []
    period = int(period_ms * NS_PER_MS)
    on = int(period_ms * duty * NS_PER_MS)
    start = int(phase_ms * NS_PER_MS)
    end = int(duration_ms * NS_PER_MS)
    while start < end:
        out.append((start, min(start + on, end)))
        start += period
    return out


def in_windows(t_ns: int, windows: list[tuple[int, int]]) -> bool:
    return any(s <= t_ns < e for s, e in windows)


def burst_orders(
    seed: int,
    n_mps: int = 100,
    duration_ms: float = 40.0,
    base_rate_s: float = 2_000.0,
    burst_factor: float = 20.0,
    burst_period_ms: float = 10.0,
    burst_duty: float = 0.25,
    initial_mid: int = 100,
    w: int = 2,
    critical_pct: int = 50,
    qty_hi: int = 3,
) -> list[Order]:
    """Per-MP order streams whose rate jumps by burst_factor on a square wave.

    base_rate_s is the per-MP steady rate. Critical orders price inside
    [m - w, m + w]; the rest sit at inert extremes. Sorted by gen_ts.
    """
    windows = burst_windows(duration_ms, burst_period_ms, burst_duty)
    end = int(duration_ms * NS_PER_MS)
    base_gap = 1e9 / base_rate_s
    orders: list[Order] = []
    for mp in range(n_mps):
        t = 10_000 + randint_span(hash64(seed, DOM_WORKLOAD, 20, mp), 0, int(base_gap))
        i = 0
        while t < end:
            side = BID if hash64(seed, DOM_WORKLOAD, 21, mp, i) & 1 == 0 else ASK
            crit = randint_span(hash64(seed, DOM_WORKLOAD, 22, mp, i), 1, 100) <= critical_pct
            if crit:
                price = randint_span(
                    hash64(seed, DOM_WORKLOAD, 23, mp, i), initial_mid - w, initial_mid + w
                )
            else:
                price = NON_CRITICAL_BID_PRICE if side == BID else NON_CRITICAL_ASK_PRICE
            qty = randint_span(hash64(seed, DOM_WORKLOAD, 24, mp, i), 1, qty_hi)
            orders.append(Order(mp=mp, gen_ts=t, side=side, price=price, qty=qty))
            gap = base_gap / burst_factor if in_windows(t, windows) else base_gap
            jitter = randint_span(hash64(seed, DOM_WORKLOAD, 25, mp, i), 50, 150)
            t += max(int(gap * jitter / 100.0), 1)
            i += 1
    orders.sort(key=lambda o: o.key())
    return orders


def orders_rows(orders: list[Order]) -> list[tuple]:
    return [(o.mp, o.gen_ts, o.side, o.price, o.qty, int(o.is_dummy)) for o in orders]


def workload_hash(orders: list[Order]) -> str:
    h = hashlib.sha256()
    for row in orders_rows(orders):
        h.update(repr(row).encode())
    return h.hexdigest()


def dump_orders_csv(path: str, orders: list[Order]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["mp", "gen_ts", "side", "price", "qty", "is_dummy"])
        w.writerows(orders_rows(orders))


def load_orders_csv(path: str) -> list[Order]:
    out: list[Order] = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(
                Order(
                    mp=int(row["mp"]),
                    gen_ts=int(row["gen_ts"]),
                    side=int(row["side"]),
                    price=int(row["price"]),
                    qty=int(row["qty"]),
                    is_dummy=bool(int(row["is_dummy"])),
                )
            )
    return out
