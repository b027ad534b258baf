"""Discrete-event packet-level engine: per-packet store-and-forward with
per-port FIFO queues and DCTCP-style ECN window control.

Doubles as the ground-truth oracle for the fidelity metrics. One engine
instance is single-threaded; distinct instances share nothing.
"""

from __future__ import annotations

import copy
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import ConfigurationError, Flow, FlowState, Topology, route

K_BDP_FRACTION = 1.0

# event kinds
_ARR = 0   # packet arrives at hop h of its path (h == len(path) -> delivered)
_ACK = 1
_REL = 2   # flow release / activation check
_SAMPLE = 3


@dataclass
class EngineConfig:
    mtu_bytes: int = 1000
    # None -> auto: the largest flow bandwidth-delay product. A fixed
    # threshold far below the BDP makes the window sawtooth drain the queue
    # and starves the link.
    ecn_k_bits: Optional[float] = None
    dctcp_g: float = 1.0 / 16.0
    init_window_pkts: Optional[int] = None   # None -> bandwidth-delay product
    slow_start: bool = False
    sample_interval: float = 50e-6

    def validate(self):
        if self.mtu_bytes < 1:
            raise ConfigurationError("mtu_bytes must be >= 1")
        if self.ecn_k_bits is not None and self.ecn_k_bits <= 0:
            raise ConfigurationError("ecn_k_bits must be > 0")
        if self.sample_interval <= 0:
            raise ConfigurationError("sample_interval must be > 0")


class _FlowRt:
    """Mutable per-flow runtime state (transport + progress)."""
    __slots__ = ("flow", "path", "prop", "hops", "next_bit", "delivered",
                 "cwnd", "inflight", "alpha", "win_acked", "win_marked",
                 "win_target", "ss", "unmet", "dependents", "active", "done",
                 "win_bits", "sent_all")

    def __init__(self, flow: Flow, path: tuple[int, ...], prop: float):
        self.flow = flow
        self.path = path
        self.prop = prop
        self.hops = len(path)
        self.next_bit = 0.0
        self.delivered = 0.0
        self.cwnd = 1.0
        self.inflight = 0
        self.alpha = 0.0
        self.win_acked = 0
        self.win_marked = 0
        self.win_target = 1
        self.ss = False
        self.unmet = len(flow.deps)
        self.dependents: list[int] = []
        self.active = False
        self.done = False
        self.win_bits = 0.0      # bits delivered during the current sample window
        self.sent_all = False


@dataclass
class EngineSnapshot:
    """Inert deep copy of all mutable engine state; restorable exactly."""
    now: float
    heap: list
    seq: int
    flows: list
    free_at: dict
    depth: dict
    pending: dict
    link_bits: dict
    sample_t: float
    port_depths: dict

    def flow_progress(self) -> dict[str, float]:
        return {rt.flow.id: rt.delivered for rt in self.flows}


class PacketEngine:
    def __init__(self, topology: Topology, flows: list[Flow],
                 config: EngineConfig | None = None, seed: int = 0,
                 dep_gap: float = 0.0):
        self.topo = topology
        self.cfg = config or EngineConfig()
        self.cfg.validate()
        self.seed = seed
        self.dep_gap = dep_gap
        self.mtu_bits = self.cfg.mtu_bytes * 8.0

        self._links = {l.id: l for l in topology.links}
        self._cap = {l.id: l.capacity for l in topology.links}
        self._lat = {l.id: l.latency for l in topology.links}
        self._switch_ports = [l.id for l in topology.switch_egress_links()]

        self.flows: list[_FlowRt] = []
        self._by_id: dict[str, int] = {}
        for f in flows:
            f.validate()
            path = route(topology, f.src, f.dst, f.id, seed)
            prop = sum(self._lat[l] for l in path)
            rt = _FlowRt(copy.copy(f), path, prop)
            rt.flow.state = FlowState.PENDING
            rt.flow.released_size = 0.0
            rt.flow.completion_time = None
            self._by_id[f.id] = len(self.flows)
            self.flows.append(rt)
        for i, rt in enumerate(self.flows):
            for d in rt.flow.deps:
                if d not in self._by_id:
                    raise ConfigurationError(f"flow {rt.flow.id}: unknown dep {d!r}")
                self.flows[self._by_id[d]].dependents.append(i)

        if self.cfg.ecn_k_bits is not None:
            self.k_bits = self.cfg.ecn_k_bits
        else:
            bdp = 65_000 * 8.0
            for rt in self.flows:
                cap = min(self._cap[l] for l in rt.path)
                rtt = 2.0 * rt.prop + rt.hops * self.mtu_bits / cap
                bdp = max(bdp, cap * rtt)
            self.k_bits = K_BDP_FRACTION * bdp

        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._n_done = 0

        # per-port lazy queue accounting: depth in bits + (finish, bits) fifo
        self.free_at = {l.id: 0.0 for l in topology.links}
        self.depth = {l.id: 0.0 for l in topology.links}
        self.pending = {l.id: deque() for l in topology.links}
        self.link_bits = {l.id: 0.0 for l in topology.links}   # cumulative serialized

        # traces (switch egress ports only, plus per-link cumulative bits)
        self.port_traces: dict[int, list[tuple[float, float]]] = {
            p: [] for p in self._switch_ports}
        self.link_bits_trace: dict[int, list[tuple[float, float]]] = {
            l.id: [] for l in topology.links}
        self.flow_bw_trace: list[tuple[float, dict[str, float]]] = []

        # callback fed one row per sample: (t, {flow_id: bw}, {port: depth}) -> stop?
        self.on_sample: Optional[Callable[[float, dict, dict], bool]] = None

        self._sample_t = self.cfg.sample_interval
        self._push(self._sample_t, (_SAMPLE,))
        for i, rt in enumerate(self.flows):
            if rt.unmet == 0:
                self._push(rt.flow.release_time, (_REL, i))

    # -- event plumbing -----------------------------------------------------

    def _push(self, t: float, payload):
        heapq.heappush(self._heap, (t, self._seq, payload))
        self._seq += 1

    def _drain(self, port: int, t: float):
        q = self.pending[port]
        d = self.depth[port]
        while q and q[0][0] <= t:
            d -= q.popleft()[1]
        self.depth[port] = 0.0 if d < 1e-9 else d

    def _init_cwnd(self, rt: _FlowRt) -> float:
        if self.cfg.slow_start:
            return float(self.cfg.init_window_pkts or 10)
        if self.cfg.init_window_pkts is not None:
            return float(self.cfg.init_window_pkts)
        cap = min(self._cap[l] for l in rt.path)
        rtt = 2.0 * rt.prop + rt.hops * self.mtu_bits / cap
        return max(1.0, round(cap * rtt / self.mtu_bits))

    def _activate(self, rt: _FlowRt, t: float):
        rt.active = True
        rt.flow.state = FlowState.ACTIVE
        if rt.flow.start_time is None:
            rt.flow.start_time = t
        rt.cwnd = self._init_cwnd(rt)
        rt.ss = self.cfg.slow_start
        rt.win_target = max(1, int(rt.cwnd))
        self._pump(rt, t)

    def _pump(self, rt: _FlowRt, t: float):
        size = rt.flow.size
        mtu = self.mtu_bits
        while not rt.sent_all and rt.inflight < int(rt.cwnd):
            remaining = size - rt.next_bit
            if remaining <= mtu:
                pkt = remaining
                rt.next_bit = size
                rt.sent_all = True
                last = True
            else:
                pkt = mtu
                rt.next_bit += mtu
                last = False
            rt.inflight += 1
            self._push(t, (_ARR, self._by_id[rt.flow.id], 0, pkt, False, last))

    def _pump_paced(self, rt: _FlowRt, t: float, rate: float):
        """Send the current window with inter-packet gaps matching `rate`."""
        size = rt.flow.size
        mtu = self.mtu_bits
        k = 0
        while not rt.sent_all and rt.inflight < int(rt.cwnd):
            remaining = size - rt.next_bit
            if remaining <= mtu:
                pkt = remaining
                rt.next_bit = size
                rt.sent_all = True
                last = True
            else:
                pkt = mtu
                rt.next_bit += mtu
                last = False
            rt.inflight += 1
            self._push(t + k * mtu / rate,
                       (_ARR, self._by_id[rt.flow.id], 0, pkt, False, last))
            k += 1

    def _complete(self, rt: _FlowRt, t: float):
        rt.done = True
        rt.active = False
        rt.delivered = rt.flow.size
        rt.flow.released_size = rt.flow.size
        rt.flow.state = FlowState.COMPLETED
        rt.flow.completion_time = t
        self._n_done += 1
        for di in rt.dependents:
            dep = self.flows[di]
            dep.unmet -= 1
            if dep.unmet == 0 and not dep.done:
                when = max(t + self.dep_gap, dep.flow.release_time, self.now)
                self._push(when, (_REL, di))

    def all_done(self) -> bool:
        return self._n_done == len(self.flows)

    # -- main loop ----------------------------------------------------------

    def run(self, t_stop: Optional[float] = None, stop_on_flag: bool = False) -> bool:
        """Process events; returns True if stopped because on_sample flagged.

        Stops when all flows complete, when the clock would pass t_stop, or
        (with stop_on_flag) at the first sample where on_sample returns True.
        """
        if t_stop is not None and t_stop < self.now:
            raise ValueError("t_stop is in the past")
        heap = self._heap
        while heap:
            if t_stop is not None and heap[0][0] > t_stop:
                self.now = t_stop
                return False
            t, _, ev = heapq.heappop(heap)
            self.now = t
            kind = ev[0]

            if kind == _ARR:
                _, fi, hop, pkt, marked, last = ev
                rt = self.flows[fi]
                if hop == rt.hops:
                    # delivered at destination
                    if last:
                        rt.delivered = rt.flow.size
                    else:
                        rt.delivered += pkt
                    rt.win_bits += pkt
                    rt.flow.released_size = rt.delivered
                    if last and not rt.done:
                        self._complete(rt, t)
                    self._push(t + rt.prop, (_ACK, fi, marked))
                    continue
                port = rt.path[hop]
                self._drain(port, t)
                if self.depth[port] + pkt > self.k_bits:
                    marked = True
                self.depth[port] += pkt
                cap = self._cap[port]
                start = self.free_at[port]
                if t > start:
                    start = t
                finish = start + pkt / cap
                self.free_at[port] = finish
                self.pending[port].append((finish, pkt))
                self.link_bits[port] += pkt
                self._push(finish + self._lat[port], (_ARR, fi, hop + 1, pkt, marked, last))

            elif kind == _ACK:
                _, fi, marked = ev
                rt = self.flows[fi]
                rt.inflight -= 1
                rt.win_acked += 1
                if marked:
                    rt.win_marked += 1
                    if rt.ss:
                        rt.ss = False
                if rt.ss:
                    rt.cwnd += 1.0
                else:
                    rt.cwnd += 1.0 / rt.cwnd
                if rt.win_acked >= rt.win_target:
                    frac = rt.win_marked / rt.win_acked
                    g = self.cfg.dctcp_g
                    rt.alpha = (1.0 - g) * rt.alpha + g * frac
                    if rt.win_marked:
                        rt.cwnd = max(1.0, rt.cwnd * (1.0 - rt.alpha / 2.0))
                    rt.win_acked = 0
                    rt.win_marked = 0
                    rt.win_target = max(1, int(rt.cwnd))
                if not rt.done:
                    self._pump(rt, t)

            elif kind == _REL:
                rt = self.flows[ev[1]]
                if not rt.active and not rt.done and rt.unmet == 0:
                    self._activate(rt, t)

            else:  # _SAMPLE
                flag = self._do_sample(t)
                if not self.all_done():
                    self._sample_t = t + self.cfg.sample_interval
                    self._push(self._sample_t, (_SAMPLE,))
                if flag and stop_on_flag:
                    return True
        return False

    def _do_sample(self, t: float) -> bool:
        interval = self.cfg.sample_interval
        flow_bw = {}
        for rt in self.flows:
            if rt.active:
                flow_bw[rt.flow.id] = rt.win_bits / interval
            rt.win_bits = 0.0
        port_depth = {}
        for p in self._switch_ports:
            self._drain(p, t)
            d = self.depth[p]
            port_depth[p] = d
            self.port_traces[p].append((t, d))
        for lid, cum in self.link_bits.items():
            self.link_bits_trace[lid].append((t, cum))
        self.flow_bw_trace.append((t, flow_bw))
        if self.on_sample is not None:
            return bool(self.on_sample(t, flow_bw, port_depth))
        return False

    # -- observation --------------------------------------------------------

    def sample_state(self) -> tuple[float, dict[str, float], dict[int, float]]:
        """Latest (t, per-flow bandwidth, per-port depth) sample row."""
        if not self.flow_bw_trace:
            raise RuntimeError("engine has not advanced through a sample window yet")
        t, bw = self.flow_bw_trace[-1]
        depths = {p: tr[-1][1] for p, tr in self.port_traces.items() if tr}
        return t, bw, depths

    def active_flows(self) -> list[_FlowRt]:
        return [rt for rt in self.flows if rt.active]

    def flow_runtime(self, flow_id: str) -> _FlowRt:
        return self.flows[self._by_id[flow_id]]

    def current_depths(self) -> dict[int, float]:
        for p in self._switch_ports:
            self._drain(p, self.now)
        return {p: self.depth[p] for p in self._switch_ports}

    # -- snapshot / restore ---------------------------------------------------

    def snapshot(self) -> EngineSnapshot:
        return EngineSnapshot(
            now=self.now,
            heap=copy.deepcopy(self._heap),
            seq=self._seq,
            flows=copy.deepcopy(self.flows),
            free_at=dict(self.free_at),
            depth=dict(self.depth),
            pending={k: deque(v) for k, v in self.pending.items()},
            link_bits=dict(self.link_bits),
            sample_t=self._sample_t,
            port_depths=dict(self.current_depths()),
        )

    def _load(self, snap: EngineSnapshot):
        self.now = snap.now
        self._heap = copy.deepcopy(snap.heap)
        self._seq = snap.seq
        self.flows = copy.deepcopy(snap.flows)
        self._by_id = {rt.flow.id: i for i, rt in enumerate(self.flows)}
        self._n_done = sum(1 for rt in self.flows if rt.done)
        self.free_at = dict(snap.free_at)
        self.depth = dict(snap.depth)
        self.pending = {k: deque(v) for k, v in snap.pending.items()}
        self.link_bits = dict(snap.link_bits)
        self._sample_t = snap.sample_t

    def restore(self, snapshot: EngineSnapshot, queue_overrides: dict[int, float]):
        """Resume from a snapshot with per-port depths overwritten.

        Overrides exactly equal to the snapshot's depths resume the original
        run bit-for-bit. Any differing override discards in-flight packets and
        materializes the requested depths as synthetic zero-accounting backlog.
        """
        for p, d in queue_overrides.items():
            if p not in self.free_at:
                raise ConfigurationError(f"override on unknown port {p}")
            if d < 0:
                raise ConfigurationError(f"negative override depth on port {p}")
        identical = all(
            abs(queue_overrides.get(p, 0.0) - snapshot.port_depths.get(p, 0.0)) == 0.0
            for p in set(queue_overrides) | set(snapshot.port_depths))
        self._load(snapshot)
        if identical:
            return
        self.resume_at(
            snapshot.now,
            flow_progress={rt.flow.id: rt.delivered for rt in self.flows},
            completions={},
            queue_overrides=queue_overrides,
        )

    def resume_at(self, t: float, flow_progress: dict[str, float],
                  completions: dict[str, float], queue_overrides: dict[int, float],
                  transport: Optional[dict[str, tuple[float, float, bool]]] = None,
                  pace_rates: Optional[dict[str, float]] = None):
        """Rebuild event state at time t after a flow-granularity phase.

        Surviving flows restart sending from `flow_progress`; flows in
        `completions` are finalized with the given (possibly compensated)
        completion times; queues become synthetic backlog per override.
        pace_rates spreads each survivor's first window at the given rate
        instead of an instantaneous burst, so the ACK clock resumes at the
        steady cadence rather than phase-locking concurrent flows.
        """
        self.now = t
        self._heap = []
        self._seq = 0

        for port in self.free_at:
            ov = queue_overrides.get(port, 0.0)
            if ov < 0:
                raise ConfigurationError(f"negative override depth on port {port}")
            self.pending[port].clear()
            self.depth[port] = ov
            if ov > 0:
                finish = t + ov / self._cap[port]
                self.free_at[port] = finish
                # synthetic backlog: occupies the queue and delays service but
                # counts toward no flow's delivered bits
                self.pending[port].append((finish, ov))
            else:
                self.free_at[port] = min(self.free_at[port], t)

        for rt in self.flows:
            rt.inflight = 0
            rt.win_bits = 0.0
            rt.win_acked = 0
            rt.win_marked = 0
            fid = rt.flow.id
            if fid in completions and not rt.done:
                self._complete_analytic(rt, completions[fid])
            elif rt.active:
                prog = flow_progress.get(fid, rt.delivered)
                rt.delivered = prog
                rt.next_bit = prog
                rt.sent_all = prog >= rt.flow.size
                rt.flow.released_size = prog
                if transport and fid in transport:
                    rt.cwnd, rt.alpha, rt.ss = transport[fid]
                rt.win_target = max(1, int(rt.cwnd))

        self._n_done = sum(1 for rt in self.flows if rt.done)
        for rt in self.flows:
            if rt.active and not rt.done:
                rate = (pace_rates or {}).get(rt.flow.id, 0.0)
                if rate > 0.0:
                    self._pump_paced(rt, t, rate)
                else:
                    self._pump(rt, t)
            elif not rt.done and rt.unmet == 0 and not rt.active:
                self._push(max(rt.flow.release_time, t), (_REL, self._by_id[rt.flow.id]))
        self._sample_t = t + self.cfg.sample_interval
        if not self.all_done():
            self._push(self._sample_t, (_SAMPLE,))

    def _complete_analytic(self, rt: _FlowRt, completion_time: float):
        rt.done = True
        rt.active = False
        rt.delivered = rt.flow.size
        rt.sent_all = True
        rt.next_bit = rt.flow.size
        rt.flow.released_size = rt.flow.size
        rt.flow.state = FlowState.COMPLETED
        rt.flow.completion_time = completion_time
        self._n_done += 1
        for di in rt.dependents:
            dep = self.flows[di]
            dep.unmet -= 1
            if dep.unmet == 0 and not dep.done:
                when = max(completion_time + self.dep_gap, dep.flow.release_time, self.now)
                self._push(when, (_REL, di))
