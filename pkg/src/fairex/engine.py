"""Matching engine: price-time limit order book, mid-price, market data.

Priority within a price level is by (gen_ts, mp), the global order key, so
the book resolves ties identically no matter what order the network delivered
the orders in. Execution price is the resting order's price. Mid-price is
floor((best_bid + best_ask)/2), retaining its last value while the book is
one-sided; every change bumps the epoch by exactly one.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

from .core import ASK, BID, Order


@dataclass(frozen=True)
class Trade:
    exec_seq: int
    bid_mp: int
    ask_mp: int
    price: int
    qty: int
    exec_ts: int
    bid_key: tuple[int, int] = (0, 0)  # (gen_ts, mp) of the bid order
    ask_key: tuple[int, int] = (0, 0)

    def essence(self) -> tuple[int, int, int, int]:
        """The fairness-oracle view: who traded with whom, at what, how much."""
        return (self.bid_mp, self.ask_mp, self.price, self.qty)


@dataclass(frozen=True)
class MidPrice:
    m: int
    epoch: int


@dataclass
class _Resting:
    order: Order
    qty_left: int


class LimitOrderBook:
    """Two heaps of resting orders; entries never compare past (gen_ts, mp)."""

    def __init__(self) -> None:
        self._bids: list[tuple[int, int, int, _Resting]] = []
        self._asks: list[tuple[int, int, int, _Resting]] = []

    def _heap(self, side: int) -> list:
        return self._bids if side == BID else self._asks

    def best(self, side: int):
        h = self._heap(side)
        if not h:
            return None
        return h[0][3]

    def best_bid(self):
        r = self.best(BID)
        return r.order.price if r else None

    def best_ask(self):
        r = self.best(ASK)
        return r.order.price if r else None

    def rest(self, order: Order, qty_left: int) -> None:
        price_key = -order.price if order.side == BID else order.price
        heapq.heappush(
            self._heap(order.side), (price_key, order.gen_ts, order.mp, _Resting(order, qty_left))
        )

    def pop_best(self, side: int) -> None:
        heapq.heappop(self._heap(side))

    def snapshot(self) -> list[tuple[str, int, int]]:
        """(side, price, total_qty) rows, asks ascending then bids descending."""
        levels: dict[tuple[int, int], int] = {}
        for _, _, _, r in self._asks:
            levels[(ASK, r.order.price)] = levels.get((ASK, r.order.price), 0) + r.qty_left
        for _, _, _, r in self._bids:
            levels[(BID, r.order.price)] = levels.get((BID, r.order.price), 0) + r.qty_left
        rows = [("ask", p, q) for (s, p), q in levels.items() if s == ASK]
        rows.sort(key=lambda t: t[1])
        bid_rows = [("bid", p, q) for (s, p), q in levels.items() if s == BID]
        bid_rows.sort(key=lambda t: -t[1])
        return rows + bid_rows


@dataclass
class MarketDataEvent:
    """One multicastable datum: enough to replay (m, epoch) downstream."""

    kind: str  # "trade" | "book" | "heartbeat"
    m: int
    epoch: int
    exec_seq: int = -1


class MatchingEngine:
    def __init__(self, initial_mid: int = 0) -> None:
        self.book = LimitOrderBook()
        self.trades: list[Trade] = []
        self._exec_seq = 0
        self._m = initial_mid
        self._epoch = 0
        self.md_events: list[MarketDataEvent] = []

    @property
    def mid(self) -> MidPrice:
        return MidPrice(self._m, self._epoch)

    def mid_price(self) -> MidPrice:
        bb, ba = self.book.best_bid(), self.book.best_ask()
        if bb is not None and ba is not None:
            m = (bb + ba) // 2
            if m != self._m:
                self._m = m
                self._epoch += 1
        return MidPrice(self._m, self._epoch)

    def submit(self, order: Order, exec_ts: int = 0) -> list[Trade]:
        """Match while crossing, rest the remainder, refresh the mid-price."""
        if order.is_dummy:
            raise ValueError("dummy orders never reach the engine")
        order.validate()
        trades: list[Trade] = []
        qty_left = order.qty
        opp = ASK if order.side == BID else BID
        while qty_left > 0:
            resting = self.book.best(opp)
            if resting is None:
                break
            if order.side == BID:
                if order.price < resting.order.price:
                    break
                bid_o, ask_o = order, resting.order
            else:
                if order.price > resting.order.price:
                    break
                bid_o, ask_o = resting.order, order
            qty = min(qty_left, resting.qty_left)
            t = Trade(
                exec_seq=self._exec_seq,
                bid_mp=bid_o.mp,
                ask_mp=ask_o.mp,
                price=resting.order.price,
                qty=qty,
                exec_ts=exec_ts,
                bid_key=bid_o.key(),
                ask_key=ask_o.key(),
            )
            self._exec_seq += 1
            trades.append(t)
            qty_left -= qty
            resting.qty_left -= qty
            if resting.qty_left == 0:
                self.book.pop_best(opp)
        if qty_left > 0:
            self.book.rest(order, qty_left)
        self.trades.extend(trades)
        mid = self.mid_price()
        for t in trades:
            self.md_events.append(MarketDataEvent("trade", mid.m, mid.epoch, t.exec_seq))
        if not trades:
            self.md_events.append(MarketDataEvent("book", mid.m, mid.epoch))
        return trades

    def heartbeat_md(self) -> MarketDataEvent:
        ev = MarketDataEvent("heartbeat", self._m, self._epoch)
        self.md_events.append(ev)
        return ev


def reference_match(orders: list[Order]) -> list[tuple[int, int, int, int]]:
    """Brute-force matcher: scan lists for the best crossing resting order
    (price first, then earliest (gen_ts, mp)). Returns Trade essences."""
    rest_bids: list[_Resting] = []
    rest_asks: list[_Resting] = []
    out: list[tuple[int, int, int, int]] = []
    for o in orders:
        qty_left = o.qty
        while qty_left > 0:
            if o.side == BID:
                pool = [r for r in rest_asks if r.order.price <= o.price]
            else:
                pool = [r for r in rest_bids if r.order.price >= o.price]
            if not pool:
                break
            if o.side == BID:
                best_price = min(r.order.price for r in pool)
            else:
                best_price = max(r.order.price for r in pool)
            at_level = [r for r in pool if r.order.price == best_price]
            r = min(at_level, key=lambda x: x.order.key())
            qty = min(qty_left, r.qty_left)
            if o.side == BID:
                out.append((o.mp, r.order.mp, r.order.price, qty))
            else:
                out.append((r.order.mp, o.mp, r.order.price, qty))
            qty_left -= qty
            r.qty_left -= qty
            if r.qty_left == 0:
                (rest_asks if o.side == BID else rest_bids).remove(r)
        if qty_left > 0:
            (rest_bids if o.side == BID else rest_asks).append(_Resting(o, qty_left))
    return out


def dump_trades_csv(path: str, trades: list[Trade]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["exec_seq", "bid_mp", "ask_mp", "price", "qty", "exec_ts"])
        for t in trades:
            w.writerow([t.exec_seq, t.bid_mp, t.ask_mp, t.price, t.qty, t.exec_ts])


def dump_book_csv(path: str, book: LimitOrderBook) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["side", "price", "total_qty"])
        w.writerows(book.snapshot())


def replay_mid_sequence(events: list[MarketDataEvent]) -> list[tuple[int, int]]:
    """Reconstruct the distinct (m, epoch) sequence a gateway would infer."""
    seq: list[tuple[int, int]] = []
    for ev in events:
        cur = (ev.m, ev.epoch)
        if not seq or seq[-1] != cur:
            seq.append(cur)
    return seq
