"""Overlay multicast tree: shape planning, round-robin packet spraying (RRPS),
proxy hedging, and receiver-side duplicate suppression.

Addressing: the root is layer -1. Layer l (0-based) has fanout**(l+1) slots.
Proxy layers are 0..depth-2; layer depth-1 is the leaf layer, whose first
n_receivers slots are occupied. depth=1 means the root feeds the leaves
directly; depth=0 is the degenerate direct-unicast baseline (root fans out to
all N receivers with no proxy layer and no spraying).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import ROOT, NodeAddr

ACCEPT = "accept"
DUPLICATE = "duplicate"
ERROR = "error"

DEFAULT_FANOUT = 10


@dataclass(frozen=True)
class TreePlan:
    n_receivers: int
    fanout: int
    depth: int
    hedge: int = 0

    def __post_init__(self) -> None:
        if self.n_receivers < 1:
            raise ValueError("n_receivers must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.depth >= 1:
            if self.fanout < 1:
                raise ValueError("fanout must be >= 1")
            if self.fanout**self.depth < self.n_receivers:
                raise ValueError("fanout**depth must cover n_receivers")
            if self.hedge and not 0 <= self.hedge < self.fanout:
                raise ValueError("hedge must satisfy 0 <= H < fanout")
        elif self.hedge:
            raise ValueError("direct unicast (depth 0) cannot hedge")

    @property
    def leaf_layer(self) -> int:
        return max(self.depth - 1, 0)

    @property
    def layer_slots(self) -> tuple[int, ...]:
        if self.depth == 0:
            return (self.n_receivers,)
        return tuple(self.fanout ** (l + 1) for l in range(self.depth))

    def slots(self, layer: int) -> int:
        if layer == -1:
            return 1
        return self.layer_slots[layer]

    def occupied(self, layer: int) -> int:
        """Real nodes in a layer (the leaf layer may be partially filled)."""
        if layer == self.leaf_layer:
            return self.n_receivers
        return self.slots(layer)

    def block_occupied(self, child_layer: int, block: int) -> int:
        """Occupied slots within one fanout-sized block of child_layer."""
        lo = block * self.fanout
        return max(0, min(self.occupied(child_layer) - lo, self.fanout))

    def nodes(self, layer: int):
        return (NodeAddr(layer, i) for i in range(self.occupied(layer)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_receivers": self.n_receivers,
                "fanout": self.fanout,
                "depth": self.depth,
                "hedge": self.hedge,
                "layer_slots": list(self.layer_slots),
                "leaf_layer": self.leaf_layer,
            },
            sort_keys=True,
        )


def plan_tree(n: int, hedge: int = 0) -> TreePlan:
    """Derive a shape for n receivers: F=10, D=round(log10 n), D >= 1.

    If 10**D falls short, F is raised to the smallest integer with F**D >= n
    (ceil semantics: 200 receivers at D=2 get F=15, since 14**2 = 196 < 200).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    depth = max(1, int(math.floor(math.log10(n) + 0.5))) if n > 1 else 1
    fanout = DEFAULT_FANOUT
    if fanout**depth < n:
        fanout = math.ceil(n ** (1.0 / depth))
        while fanout**depth < n:  # guard float fuzz
            fanout += 1
        while (fanout - 1) ** depth >= n:
            fanout -= 1
    return TreePlan(n_receivers=n, fanout=fanout, depth=depth, hedge=hedge)


def du_plan(n: int) -> TreePlan:
    """Direct-unicast baseline: no proxies, root fans out to all receivers."""
    return TreePlan(n_receivers=n, fanout=0, depth=0, hedge=0)


def parent_index(plan: TreePlan, child_layer: int, child_index: int, msg_id: int,
                 rotate: bool = True) -> int:
    """Index (in the parent layer) of the node serving this child for msg_id."""
    if child_layer == 0 or plan.depth == 0:
        return -1  # root
    p_slots = plan.slots(child_layer - 1)
    block = child_index // plan.fanout
    k = msg_id if rotate else 0
    return (block - k) % p_slots


def rrps_children(proxy: NodeAddr, msg_id: int, plan: TreePlan,
                  rotate: bool = True) -> list[NodeAddr]:
    """Children this node serves for msg_id: block (p + k) mod P, shifted by
    one block per message so consecutive messages take different paths."""
    if plan.depth == 0:
        if proxy.layer != -1:
            raise ValueError("direct unicast has no proxies")
        return list(plan.nodes(0))
    child_layer = proxy.layer + 1
    if child_layer > plan.leaf_layer:
        raise ValueError(f"{proxy} is a leaf")
    if proxy.layer == -1:
        return list(plan.nodes(0))  # root serves the whole first layer
    p_slots = plan.slots(proxy.layer)
    k = msg_id if rotate else 0
    block = (proxy.index + k) % p_slots
    lo = block * plan.fanout
    hi = lo + plan.block_occupied(child_layer, block)
    return [NodeAddr(child_layer, c) for c in range(lo, hi)]


def hedge_targets(proxy: NodeAddr, msg_id: int, plan: TreePlan,
                  rotate: bool = True) -> list[NodeAddr]:
    """Children of the H siblings at (p-1 .. p-H) mod P, in that order: the
    node relays the same message to its nieces, giving every downstream node
    H+1 copies in a lossless run."""
    if plan.hedge == 0 or proxy.layer == -1 or plan.depth == 0:
        return []
    p_slots = plan.slots(proxy.layer)
    out: list[NodeAddr] = []
    for j in range(1, plan.hedge + 1):
        sib = NodeAddr(proxy.layer, (proxy.index - j) % p_slots)
        out.extend(rrps_children(sib, msg_id, plan, rotate))
    return out


def burst_targets(plan: TreePlan, sender: NodeAddr, msg_id: int,
                  rotate: bool = True, root_copies: int = 1) -> list[NodeAddr]:
    """Every packet this sender transmits for one message, in wire order.

    Proxies send their own rotated block first, then the hedge segments for
    siblings p-1..p-H. The root repeats its child list root_copies times
    (round-major) so layer 0 gets the same H+1 redundancy as deeper layers.
    """
    if sender.layer == -1:
        children = rrps_children(sender, msg_id, plan, rotate)
        return [c for _ in range(max(1, root_copies)) for c in children]
    return (rrps_children(sender, msg_id, plan, rotate)
            + hedge_targets(sender, msg_id, plan, rotate))


def copy_sources(plan: TreePlan, child: NodeAddr, msg_id: int,
                 rotate: bool = True, root_hedging: bool = True
                 ) -> list[tuple[NodeAddr, int]]:
    """(sender, packet index within sender's burst) for each copy this child
    receives: its own parent p plus proxies p+1..p+H (whose hedge segments
    cover p's children)."""
    copies: list[tuple[NodeAddr, int]] = []
    if child.layer == 0 or plan.depth == 0:
        n0 = plan.occupied(0)
        reps = plan.hedge + 1 if (root_hedging and plan.depth >= 1) else 1
        for r in range(reps):
            copies.append((ROOT, r * n0 + child.index))
        return copies
    p_slots = plan.slots(child.layer - 1)
    p = parent_index(plan, child.layer, child.index, msg_id, rotate)
    slot_in_block = child.index % plan.fanout
    for j in range(plan.hedge + 1):
        q = NodeAddr(child.layer - 1, (p + j) % p_slots)
        # Offset of segment j within q's burst: q's own block, then hedge
        # segments for q-1..q-(j-1), each sized by its block occupancy.
        off = 0
        for jj in range(j):
            src = (q.index - jj) % p_slots
            blk = (src + (msg_id if rotate else 0)) % p_slots
            off += plan.block_occupied(child.layer, blk)
        copies.append((q, off + slot_in_block))
    return copies


def path_count(plan: TreePlan) -> int:
    """Virtual root->leaf path combinations under RRPS: prod_{d=1}^{D-1} F^d."""
    if plan.depth < 1:
        raise ValueError("path_count needs depth >= 1")
    out = 1
    for d in range(1, plan.depth):
        out *= plan.fanout**d
    return out


def nbuf_for_rate(rate_per_s: float) -> int:
    """Smallest power of two >= the per-second message rate."""
    n = 1
    while n < rate_per_s:
        n <<= 1
    return n


@dataclass
class DedupBuffer:
    """Fixed-length de-duplication: index = msg_id AND (Nbuf-1).

    Relies on bounded reordering (ids a window apart never swap); a slot that
    already holds a larger id flags a violation instead of silently accepting.
    """

    nbuf: int
    slots: list[int] = field(default_factory=list)
    violations: int = 0

    def __post_init__(self) -> None:
        if self.nbuf < 1 or self.nbuf & (self.nbuf - 1):
            raise ValueError("nbuf must be a power of two")
        if not self.slots:
            self.slots = [-1] * self.nbuf  # -1 sentinel so msg_id 0 is accepted

    @classmethod
    def for_rate(cls, rate_per_s: float) -> "DedupBuffer":
        return cls(nbuf_for_rate(rate_per_s))


def dedup_accept(buf: DedupBuffer, msg_id: int) -> str:
    if msg_id < 0:
        raise ValueError("msg_id must be >= 0")
    idx = msg_id & (buf.nbuf - 1)
    prev = buf.slots[idx]
    if prev < msg_id:
        buf.slots[idx] = msg_id
        return ACCEPT
    if prev == msg_id:
        return DUPLICATE
    buf.violations += 1
    return ERROR
