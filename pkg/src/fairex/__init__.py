"""fairex: a deterministic fair cloud-exchange simulator.

Outbound: overlay multicast with round-robin packet spraying, proxy hedging,
and hold-and-release delivery. Inbound: reverse-tree order submission through
per-node sequencers and limit order queues into a price-time matching engine.
"""

__version__ = "0.1.0"
