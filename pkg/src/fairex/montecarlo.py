"""Monte Carlo analysis of hedged tree latency, independent of the simulator.

The latency to a layer-n node is L(i, n) = min over j in 0..H of
L((floor(i/F) - j) mod S(n-1), n-1) + hop, where S(m) = F^m is the size of
layer m, hops are IID draws, and layer-0 values are themselves single draws
(the root-to-layer-0 hop). A leaf at layer D therefore accumulates D+1 draws
when H=0. Hedge indices wrap modulo the parent layer, and each (child,
parent) edge has one realization per iteration no matter how many hedge
offsets select it, so raising H beyond the parent-layer size changes
nothing.

All draws are keyed by (seed, iteration, layer, child, parent), making
samples independent of evaluation order and identical across backends.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import NS_PER_US, ConfigError
from .kernels import mc_min_add
from .rng import DOM_MC, hash64, hash64_np, randint_span, randint_span_np

DIST_UNIFORM = "uniform"
DIST_CONSTANT = "constant"


@dataclass(frozen=True)
class HedgeModel:
    depth: int = 2
    fanout: int = 10
    hedge: int = 0
    dist: str = DIST_UNIFORM
    hop_lo_us: int = 20
    hop_hi_us: int = 80
    hop_const_us: int = 50
    iterations: int = 100_000
    seed: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.fanout < 1:
            raise ConfigError("fanout must be >= 1")
        if self.hedge < 0:
            raise ConfigError("hedge must be >= 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.dist not in (DIST_UNIFORM, DIST_CONSTANT):
            raise ConfigError(f"unknown hop distribution {self.dist!r}")
        if self.dist == DIST_UNIFORM and self.hop_hi_us < self.hop_lo_us:
            raise ConfigError("hop_hi_us must be >= hop_lo_us")

    def layer_size(self, layer: int) -> int:
        return self.fanout**layer

    def _hop_from_hash(self, h: int) -> int:
        if self.dist == DIST_CONSTANT:
            return self.hop_const_us * NS_PER_US
        return randint_span(h, self.hop_lo_us * NS_PER_US, self.hop_hi_us * NS_PER_US)

    def _hops_from_hashes(self, h: np.ndarray) -> np.ndarray:
        if self.dist == DIST_CONSTANT:
            return np.full(h.shape, self.hop_const_us * NS_PER_US, dtype=np.int64)
        return randint_span_np(
            h, self.hop_lo_us * NS_PER_US, self.hop_hi_us * NS_PER_US
        ).astype(np.int64)


def _edge_hash(model: HedgeModel, iteration: int, layer: int, child: int, parent: int) -> int:
    return hash64(model.seed, DOM_MC, iteration, layer, child, parent + 1)


def sample_latency(model: HedgeModel, leaf_index: int = 0, iteration: int = 0) -> int:
    """One draw of the leaf's latency via the plain recursion (reference path)."""
    memo: dict[tuple[int, int], int] = {}

    def value(layer: int, index: int) -> int:
        key = (layer, index)
        if key in memo:
            return memo[key]
        if layer == 0:
            v = model._hop_from_hash(_edge_hash(model, iteration, 0, index, -1))
        else:
            psize = model.layer_size(layer - 1)
            base_parent = index // model.fanout
            v = None
            for j in range(min(model.hedge + 1, psize)):
                parent = (base_parent - j) % psize
                hop = model._hop_from_hash(_edge_hash(model, iteration, layer, index, parent))
                cand = value(layer - 1, parent) + hop
                if v is None or cand < v:
                    v = cand
        memo[key] = v
        return v

    if not 0 <= leaf_index < model.layer_size(model.depth):
        raise ConfigError("leaf_index outside the leaf layer")
    return value(model.depth, leaf_index)


def _ancestor_cones(model: HedgeModel, leaf_index: int) -> list[np.ndarray]:
    """Node index sets per layer that can reach the leaf, layer 0..D."""
    cones = [np.array([leaf_index], dtype=np.int64)]
    current = cones[0]
    for layer in range(model.depth, 0, -1):
        psize = model.layer_size(layer - 1)
        offsets = np.arange(min(model.hedge + 1, psize), dtype=np.int64)
        parents = (current[:, None] // model.fanout - offsets[None, :]) % psize
        current = np.unique(parents)
        cones.append(current)
    cones.reverse()
    return cones


def run_model(model: HedgeModel, leaf_index: int = 0) -> np.ndarray:
    """All iterations' samples for one leaf, vectorized over iterations."""
    if not 0 <= leaf_index < model.layer_size(model.depth):
        raise ConfigError("leaf_index outside the leaf layer")
    iters = np.arange(model.iterations, dtype=np.int64)
    cones = _ancestor_cones(model, leaf_index)
    base_nodes = cones[0]
    h = hash64_np(model.seed, DOM_MC, iters[:, None], 0, base_nodes[None, :], 0)
    values = model._hops_from_hashes(h)  # (iters, len(base))
    for layer in range(1, model.depth + 1):
        children = cones[layer]
        parent_nodes = cones[layer - 1]  # sorted unique, from np.unique
        psize = model.layer_size(layer - 1)
        k_opts = min(model.hedge + 1, psize)
        parents_global = (
            children[:, None] // model.fanout
            - np.arange(k_opts, dtype=np.int64)[None, :]
        ) % psize
        parents_local = np.searchsorted(parent_nodes, parents_global)
        eh = hash64_np(
            model.seed,
            DOM_MC,
            iters[:, None, None],
            layer,
            children[None, :, None],
            parents_global[None, :, :] + 1,
        )
        edges = model._hops_from_hashes(eh)  # (iters, n_children, k_opts)
        values = mc_min_add(values, parents_local, edges)
    return values[:, 0]


@dataclass
class McSummary:
    mean_ns: float
    std_ns: float
    cdf: list[tuple[float, float]] = field(default_factory=list)  # (latency_us, cum_prob)


def summarize(samples: np.ndarray, cdf_points: int = 101) -> McSummary:
    if samples.shape[0] < 2:
        raise ConfigError("need at least 2 samples to summarize")
    s = np.sort(samples)
    n = s.shape[0]
    cdf = []
    for k in range(cdf_points):
        q = k / (cdf_points - 1)
        rank = max(1, int(np.ceil(q * n))) if q > 0 else 1
        cdf.append((float(s[rank - 1]) / NS_PER_US, q))
    return McSummary(
        mean_ns=float(np.mean(samples)),
        std_ns=float(np.std(samples, ddof=1)),
        cdf=cdf,
    )


def dump_cdf_csv(path: str, summary: McSummary) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["latency_us", "cum_prob"])
        for lat, prob in summary.cdf:
            w.writerow([f"{lat:.3f}", f"{prob:.4f}"])
