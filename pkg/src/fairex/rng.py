"""Keyed, counter-based randomness.

Every random quantity in the simulator is a pure function of the master seed
and a tuple of integer keys (domain tag, node coordinates, message id, ...).
This gives three properties the simulators rely on:

* determinism: same seed + keys -> same sample, on every backend;
* order independence: samples do not depend on evaluation order, so the
  event-driven engine and the vectorized kernel draw identical delays;
* stream isolation: adding a VM or a message never perturbs the samples any
  other key tuple sees.

The hash is a splitmix64-style chain. Scalar Python and numpy paths produce
bit-identical uint64 outputs; floating-point transforms (Box-Muller, exp) are
done in numpy only, and integer transforms are exact on both paths.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

# Domain tags keep unrelated sample streams disjoint.
DOM_LINK = 0x01        # per-packet link delay
DOM_CLOCK = 0x02       # per-VM clock offset
DOM_SPIKE_ON = 0x03    # background spike activation per (link, second)
DOM_SPIKE_MAG = 0x04   # background spike magnitude
DOM_SPIKE_PHASE = 0x05 # background spike start within its second
DOM_WORKLOAD = 0x06    # order/message workload generation
DOM_MC = 0x07          # Monte Carlo hop draws
DOM_STRAGGLER = 0x08   # straggler assignment


def mix64(z: int) -> int:
    """splitmix64 finalizer (scalar)."""
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & MASK64
    return z ^ (z >> 31)


def hash64(seed: int, *keys: int) -> int:
    """Hash a key tuple to a uint64. Negative keys wrap mod 2**64."""
    h = mix64(seed & MASK64)
    for k in keys:
        h = mix64(h ^ (k & MASK64))
    return h


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
    return z ^ (z >> np.uint64(31))


def hash64_np(seed: int, *keys) -> np.ndarray:
    """Vectorized hash64. Keys are ints or integer arrays; they broadcast."""
    with np.errstate(over="ignore"):  # uint64 wraparound is the algorithm
        h = _mix64_np(np.asarray(seed & MASK64, dtype=np.uint64))
        for k in keys:
            ka = np.asarray(k)
            if ka.dtype != np.uint64:
                ka = ka.astype(np.int64).astype(np.uint64)
            h = _mix64_np(h ^ ka)
    return h


def u01(h: int) -> float:
    """Map a uint64 hash to a float in [0, 1) (53-bit, exact on all paths)."""
    return (h >> 11) * (1.0 / (1 << 53))


def u01_np(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def randint_span(h: int, lo: int, hi: int) -> int:
    """Integer in [lo, hi] from a hash. Modulo bias is negligible (span << 2**64)."""
    return lo + h % (hi - lo + 1)


def randint_span_np(h: np.ndarray, lo: int, hi: int) -> np.ndarray:
    span = np.uint64(hi - lo + 1)
    return (h % span).astype(np.int64) + lo


def normal_np(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Standard normal via Box-Muller from two uniforms in [0, 1)."""
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    return r * np.cos(2.0 * np.pi * u2)


def exponential_np(u: np.ndarray, mean: float) -> np.ndarray:
    return -mean * np.log(1.0 - u)
