"""Shared domain model: topology graph, flows, event queue, deterministic routing.

Units are bits and seconds everywhere unless a name says otherwise.
"""

from __future__ import annotations

import heapq
import json
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional


class ConfigurationError(ValueError):
    """Raised when a topology/workload/scenario parameter is invalid."""


class RoutingError(ValueError):
    """Raised for unroutable (src, dst) pairs."""


@dataclass(frozen=True)
class Link:
    """One directed simplex channel. Bidirectional cables are two Links."""
    id: int
    src: str
    dst: str
    capacity: float  # bits/s
    latency: float   # seconds


@dataclass
class Topology:
    hosts: list[str]
    switches: list[str]
    links: list[Link]
    tiers: dict[str, str]            # switch id -> "leaf" | "spine"
    host_leaf: dict[str, str]        # host id -> its leaf switch
    # adjacency: (src node, dst node) -> Link
    adj: dict[tuple[str, str], Link] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adj:
            self.adj = {(l.src, l.dst): l for l in self.links}
        self.link_by_id = {l.id: l for l in self.links}

    @property
    def n_spines(self) -> int:
        return sum(1 for t in self.tiers.values() if t == "spine")

    def spine_ids(self) -> list[str]:
        return [s for s in self.switches if self.tiers[s] == "spine"]

    def switch_egress_links(self) -> list[Link]:
        """Links whose source endpoint is a switch (the monitored queues)."""
        return [l for l in self.links if l.src in self.tiers]

    def structural_hash(self) -> int:
        payload = json.dumps(
            {
                "hosts": self.hosts,
                "switches": self.switches,
                "tiers": self.tiers,
                "links": [(l.id, l.src, l.dst, l.capacity, l.latency) for l in self.links],
            },
            sort_keys=True,
        ).encode()
        return zlib.crc32(payload)

    def to_json(self) -> str:
        """Adjacency dump for debugging."""
        return json.dumps(
            {
                "hosts": self.hosts,
                "switches": self.switches,
                "tiers": self.tiers,
                "links": [
                    {"id": l.id, "src": l.src, "dst": l.dst,
                     "capacity_bps": l.capacity, "latency_s": l.latency}
                    for l in self.links
                ],
            },
            indent=2,
        )


def build_leaf_spine(leaves: int, spines: int, hosts_per_leaf: int,
                     link_capacity: float, link_latency: float) -> Topology:
    """Construct a 2-tier leaf-spine Clos fabric.

    Every host attaches to one leaf; every leaf connects to every spine.
    Each cable is modeled as a pair of directed simplex links.
    """
    if leaves < 1 or spines < 1 or hosts_per_leaf < 1:
        raise ConfigurationError("leaves, spines and hosts_per_leaf must all be >= 1")
    if link_capacity <= 0:
        raise ConfigurationError("link capacity must be > 0")
    if link_latency < 0:
        raise ConfigurationError("link latency must be >= 0")

    hosts = [f"h{i}" for i in range(leaves * hosts_per_leaf)]
    leaf_sw = [f"leaf{i}" for i in range(leaves)]
    spine_sw = [f"spine{i}" for i in range(spines)]
    tiers = {s: "leaf" for s in leaf_sw}
    tiers.update({s: "spine" for s in spine_sw})

    links: list[Link] = []
    host_leaf: dict[str, str] = {}

    def add_pair(a: str, b: str):
        links.append(Link(len(links), a, b, link_capacity, link_latency))
        links.append(Link(len(links), b, a, link_capacity, link_latency))

    for li, leaf in enumerate(leaf_sw):
        for hi in range(hosts_per_leaf):
            host = hosts[li * hosts_per_leaf + hi]
            host_leaf[host] = leaf
            add_pair(host, leaf)
    for leaf in leaf_sw:
        for spine in spine_sw:
            add_pair(leaf, spine)

    return Topology(hosts=hosts, switches=leaf_sw + spine_sw, links=links,
                    tiers=tiers, host_leaf=host_leaf)


def ecmp_index(flow_id: str, seed: int, n: int) -> int:
    """Stable hash used to pin a flow onto one of n equal-cost spines."""
    return zlib.crc32(f"{flow_id}|{seed}".encode()) % n


def route(topology: Topology, src: str, dst: str, flow_id: str, seed: int) -> tuple[int, ...]:
    """Deterministic per-flow path (tuple of link ids), ECMP by hashed flow id.

    Same-leaf pairs go host->leaf->host; cross-leaf pairs traverse one spine
    chosen by ``ecmp_index``.
    """
    if src == dst:
        raise RoutingError(f"src == dst ({src})")
    if src not in topology.host_leaf:
        raise RoutingError(f"unknown host {src!r}")
    if dst not in topology.host_leaf:
        raise RoutingError(f"unknown host {dst!r}")

    leaf_s = topology.host_leaf[src]
    leaf_d = topology.host_leaf[dst]
    if leaf_s == leaf_d:
        nodes = [src, leaf_s, dst]
    else:
        spines = topology.spine_ids()
        spine = spines[ecmp_index(flow_id, seed, len(spines))]
        nodes = [src, leaf_s, spine, leaf_d, dst]
    return tuple(topology.adj[(a, b)].id for a, b in zip(nodes, nodes[1:]))


class FlowState(Enum):
    PENDING = "pending"
    ACTIVE = "active"
    COMPLETED = "completed"


@dataclass
class Flow:
    """A point-to-point transfer; the unit shared by all simulation modes."""
    id: str
    src: str
    dst: str
    size: float                      # total bits (L_init)
    release_time: float = 0.0
    weight: float = 1.0              # priority weight, >= 0
    min_bandwidth: float = float("inf")
    deps: tuple[str, ...] = ()
    # runtime state
    released_size: float = 0.0       # cumulative transmitted bits (L_cum)
    state: FlowState = FlowState.PENDING
    start_time: Optional[float] = None
    completion_time: Optional[float] = None

    def remaining(self) -> float:
        return self.size - self.released_size

    def validate(self):
        if self.size <= 0:
            raise ConfigurationError(f"flow {self.id}: size must be > 0")
        if self.release_time < 0:
            raise ConfigurationError(f"flow {self.id}: negative release time")
        if self.weight < 0:
            raise ConfigurationError(f"flow {self.id}: negative weight")


class EventQueue:
    """Min-heap of (time, seq, payload); equal-time events dequeue in insertion order."""

    def __init__(self, start: float = 0.0):
        self.now = start
        self._heap: list[tuple[float, int, object]] = []
        self._seq = 0

    def push(self, time: float, payload) -> None:
        if time < self.now - 1e-15:
            raise ValueError(f"event at {time} is before current clock {self.now}")
        heapq.heappush(self._heap, (time, self._seq, payload))
        self._seq += 1

    def pop(self):
        time, _, payload = heapq.heappop(self._heap)
        if time > self.now:
            self.now = time
        return time, payload

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
