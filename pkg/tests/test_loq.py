"""LOQ unit tests: classification, key ordering, epoch semantics."""

from hypothesis import given, settings
from hypothesis import strategies as st

from fairex.core import ASK, BID, Order
from fairex.loq import CRITICAL, NON_CRITICAL, LoqState, classify
from fairex.rng import hash64, randint_span


def order(price, gen_ts, mp=0, side=BID):
    return Order(mp=mp, gen_ts=gen_ts, side=side, price=price, qty=1)


def test_classify_window():
    assert classify(order(101, 1), m=100, w=2) == CRITICAL
    assert classify(order(97, 1), m=100, w=2) == NON_CRITICAL
    assert classify(order(98, 1), m=100, w=2) == CRITICAL  # boundary m-w
    assert classify(order(102, 1), m=100, w=2) == CRITICAL  # boundary m+w
    assert classify(order(103, 1, side=ASK), m=100, w=2) == NON_CRITICAL


def test_classify_degenerate_window():
    assert classify(order(100, 1), m=100, w=0) == CRITICAL
    assert classify(order(99, 1), m=100, w=0) == NON_CRITICAL
    assert classify(order(101, 1), m=100, w=0) == NON_CRITICAL


def test_classify_infinite_window():
    for p in (1, 100, 10**6):
        assert classify(order(p, 1), m=100, w=None) == CRITICAL


def test_single_order_roundtrip():
    q = LoqState(w=2, current_m=100)
    q.enqueue(order(100, 5))
    assert q.dequeue().gen_ts == 5
    assert q.dequeue() is None


def test_critical_beats_noncritical_same_epoch():
    q = LoqState(w=2, current_m=100)
    q.enqueue(order(90, 1))  # non-critical, earlier gen_ts
    q.enqueue(order(100, 9))  # critical, later gen_ts
    assert q.dequeue().gen_ts == 9
    assert q.dequeue().gen_ts == 1


def test_earlier_epoch_beats_later_regardless_of_class():
    # key (0,1,9) sorts before (1,0,1)
    q = LoqState(w=2, current_m=100)
    q.enqueue(order(90, 9))  # epoch 0, non-critical
    q.on_mid_price(101)
    q.enqueue(order(101, 1))  # epoch 1, critical
    first, second = q.dequeue(), q.dequeue()
    assert (first.gen_ts, second.gen_ts) == (9, 1)


def test_epoch_bump_between_criticals():
    q = LoqState(w=2, current_m=100)
    k1 = q.enqueue(order(100, 9))
    q.on_mid_price(101)
    k2 = q.enqueue(order(101, 1))
    assert k1 < k2
    assert q.dequeue().gen_ts == 9


def test_criticality_dominates_timestamp():
    # key (0,0,5) before (0,1,3)
    q = LoqState(w=2, current_m=100)
    q.enqueue(order(90, 3))
    q.enqueue(order(100, 5))
    assert [o.gen_ts for o in q.drain()] == [5, 3]


def test_mid_price_epoch_counting():
    q = LoqState(w=2, current_m=100)
    q.on_mid_price(100)
    assert q.current_epoch == 0
    q.on_mid_price(101)
    q.on_mid_price(100)
    assert q.current_epoch == 2
    assert q.current_m == 100


def test_enqueued_keys_survive_epoch_bump():
    q = LoqState(w=2, current_m=100)
    q.enqueue(order(100, 50))
    q.on_mid_price(105)
    q.enqueue(order(105, 10))
    # the first order keeps epoch 0 and still dequeues first
    assert [o.gen_ts for o in q.drain()] == [50, 10]


def test_drain_equals_sort_oracle():
    for seed in range(20):
        q = LoqState(w=2, current_m=100)
        entries = []
        ins = 0
        for i in range(120):
            h = hash64(seed, 0xB, i)
            if randint_span(h, 0, 9) == 0:
                q.on_mid_price(q.current_m + randint_span(hash64(h, 1), -3, 3))
                continue
            o = order(
                price=randint_span(hash64(h, 2), 95, 105),
                gen_ts=1000 + i,
                mp=randint_span(hash64(h, 3), 0, 4),
            )
            key = q.enqueue(o)
            entries.append(((*key, ins), o))
            ins += 1
        expected = [o for _, o in sorted(entries, key=lambda e: e[0])]
        assert q.drain() == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_dequeue_monotonicity_properties(seed):
    q = LoqState(w=2, current_m=100)
    for i in range(60):
        h = hash64(seed, 0xC, i)
        if randint_span(h, 0, 7) == 0:
            q.on_mid_price(100 + randint_span(hash64(h, 1), -4, 4))
        q.enqueue(
            Order(
                mp=randint_span(hash64(h, 2), 0, 3),
                gen_ts=1000 + i,
                side=BID,
                price=randint_span(hash64(h, 3), 94, 106),
                qty=1,
            )
        )
    keys = []
    prev_key = None
    while True:
        k = q.peek_key()
        if k is None:
            break
        q.dequeue()
        if prev_key is not None:
            assert k >= prev_key  # full lexicographic monotonicity
            assert k[0] >= prev_key[0]  # epoch monotone
        prev_key = k
        keys.append(k)
    # within one (epoch, class) group, gen_ts non-decreasing
    for (e1, c1, t1, _), (e2, c2, t2, _) in zip(keys, keys[1:]):
        if (e1, c1) == (e2, c2):
            assert t1 <= t2


def test_fifo_degeneration_infinite_window():
    q = LoqState(w=None, current_m=100)
    ts = [randint_span(hash64(1, 0xD, i), 0, 10**6) for i in range(50)]
    for i, t in enumerate(ts):
        q.enqueue(order(90 + (i % 20), 1_000_000 + t, mp=i % 3))
    got = [(o.gen_ts, o.mp) for o in q.drain()]
    assert got == sorted(got)


def test_epoch_skew_counter():
    q = LoqState(w=2, current_m=100)
    q.observe(101, epoch_hint=1)
    assert q.epoch_skew_count == 0
    q.observe(102, epoch_hint=5)  # engine is ahead of this node's view
    assert q.epoch_skew_count == 1


def test_min_pending_gen_ts():
    q = LoqState(w=2, current_m=100)
    assert q.min_pending_gen_ts() is None
    q.enqueue(order(100, 70))
    q.enqueue(order(90, 30))  # non-critical but earliest gen_ts
    assert q.min_pending_gen_ts() == 30
