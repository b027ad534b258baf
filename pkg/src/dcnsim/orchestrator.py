"""Run modes: pure packet (PLS), pure fluid (FLS), and the cyclic hybrid
loop that alternates granularity under control-layer decisions."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .control import ControlConfig, StabilityMonitor, schedule_flow_to_packet
from .core import Flow, Topology, route
from .flow_engine import (InfeasibleAllocationError, SteadyFlowView,
                          estimate_steady_duration, fast_forward,
                          reallocate_bandwidth)
from .metrics import FlowRecord, RunSummary, job_completion_time
from .packet_engine import EngineConfig, PacketEngine, _REL
from .predictor import AttentionWeights
from .transition import abstract_state, compensate_fct, restore_state
from .workload import FlowSchedule

log = logging.getLogger(__name__)


@dataclass
class Phase:
    t_begin: float
    t_end: float
    mode: str       # "packet" | "flow"
    reason: str = ""


@dataclass
class RunResult:
    records: list[FlowRecord]
    summary: RunSummary
    phases: list[Phase] = field(default_factory=list)
    port_traces: dict = field(default_factory=dict)
    link_bits_trace: dict = field(default_factory=dict)
    flow_bw_trace: list = field(default_factory=list)


def _records_from_engine(engine: PacketEngine, mode: str) -> list[FlowRecord]:
    recs = []
    for rt in engine.flows:
        f = rt.flow
        if f.completion_time is None:
            raise RuntimeError(f"flow {f.id} never completed")
        recs.append(FlowRecord(id=f.id, src=f.src, dst=f.dst, size_bits=f.size,
                               release_s=f.release_time,
                               start_s=f.start_time if f.start_time is not None
                               else f.release_time,
                               completion_s=f.completion_time, mode=mode))
    return recs


def _mean_link_throughput(link_bits: dict[int, float], jct: float) -> dict[str, float]:
    if jct <= 0:
        return {}
    return {str(lid): bits / jct for lid, bits in link_bits.items() if bits > 0}


def run_pure_pls(topology: Topology, schedule: FlowSchedule,
                 engine_cfg: Optional[EngineConfig] = None, seed: int = 0,
                 dep_gap: float = 0.0) -> RunResult:
    engine = PacketEngine(topology, schedule.flows, engine_cfg, seed=seed,
                          dep_gap=dep_gap)
    t0 = time.perf_counter()
    engine.run()
    wall = time.perf_counter() - t0
    records = _records_from_engine(engine, "PLS")
    jct = job_completion_time(records)
    summary = RunSummary(mode="PLS", seed=seed, jct=jct, wall_clock=wall,
                         n_flows=len(records),
                         mean_link_throughput=_mean_link_throughput(engine.link_bits, jct))
    return RunResult(records=records, summary=summary,
                     phases=[Phase(0.0, jct, "packet")],
                     port_traces=engine.port_traces,
                     link_bits_trace=engine.link_bits_trace,
                     flow_bw_trace=engine.flow_bw_trace)


def run_pure_fls(topology: Topology, schedule: FlowSchedule, seed: int = 0,
                 dep_gap: float = 0.0) -> RunResult:
    """Event-driven fluid model: weighted max-min allocation recomputed at
    every flow arrival and completion; completion times follow analytically."""
    flows = [Flow(**{**f.__dict__}) for f in schedule.flows]
    by_id = {f.id: i for i, f in enumerate(flows)}
    paths = {f.id: route(topology, f.src, f.dst, f.id, seed) for f in flows}
    unmet = {f.id: len(f.deps) for f in flows}
    dependents: dict[str, list[str]] = {f.id: [] for f in flows}
    for f in flows:
        for d in f.deps:
            dependents[d].append(f.id)

    remaining = {f.id: f.size for f in flows}
    ready_at = {f.id: f.release_time for f in flows if not f.deps}
    active: dict[str, float] = {}    # id -> current rate
    start_time: dict[str, float] = {}
    completion: dict[str, float] = {}
    link_bits: dict[int, float] = {l.id: 0.0 for l in topology.links}

    t0 = time.perf_counter()
    now = 0.0
    n_done = 0
    while n_done < len(flows):
        # admit ready flows
        due = [fid for fid, at in ready_at.items() if at <= now + 1e-18]
        for fid in due:
            del ready_at[fid]
            active[fid] = 0.0
            start_time[fid] = now
        if active:
            views = [SteadyFlowView(flow_id=fid, remaining=remaining[fid],
                                    b_inst=0.0, path=paths[fid],
                                    weight=flows[by_id[fid]].weight,
                                    b_min=0.0)
                     for fid in active]
            reallocate_bandwidth(views, topology)
            for v in views:
                active[v.flow_id] = v.b_re
            horizon = min((remaining[v.flow_id] / v.b_re for v in views if v.b_re > 0),
                          default=float("inf"))
        else:
            horizon = float("inf")
        next_release = min(ready_at.values(), default=float("inf"))
        if horizon == float("inf") and next_release == float("inf"):
            raise RuntimeError("fluid simulation stalled: no progress possible")
        dt = min(horizon, max(next_release - now, 0.0))
        if next_release - now < horizon:
            dt = next_release - now
        new_now = now + dt
        for fid, rate in list(active.items()):
            moved = rate * dt
            for lid in paths[fid]:
                link_bits[lid] += min(moved, remaining[fid])
            if moved >= remaining[fid] - max(1e-9 * remaining[fid], 1e-6):
                remaining[fid] = 0.0
                completion[fid] = new_now
                del active[fid]
                n_done += 1
                for dep in dependents[fid]:
                    unmet[dep] -= 1
                    if unmet[dep] == 0:
                        ready_at[dep] = max(flows[by_id[dep]].release_time,
                                            new_now + dep_gap)
            else:
                remaining[fid] -= moved
        now = new_now
    wall = time.perf_counter() - t0

    records = [FlowRecord(id=f.id, src=f.src, dst=f.dst, size_bits=f.size,
                          release_s=f.release_time, start_s=start_time[f.id],
                          completion_s=completion[f.id], mode="FLS")
               for f in flows]
    jct = job_completion_time(records)
    summary = RunSummary(mode="FLS", seed=seed, jct=jct, wall_clock=wall,
                         n_flows=len(records), flow_mode_fraction=1.0,
                         mean_link_throughput=_mean_link_throughput(link_bits, jct))
    return RunResult(records=records, summary=summary,
                     phases=[Phase(0.0, jct, "flow")])


def run_hybrid(topology: Topology, schedule: FlowSchedule,
               engine_cfg: Optional[EngineConfig] = None,
               control_cfg: Optional[ControlConfig] = None,
               predictor_weights: Optional[AttentionWeights] = None,
               use_restoration: bool = True, seed: int = 0,
               dep_gap: float = 0.0) -> RunResult:
    """Cyclic workflow: packet simulation until the monitor flags a steady
    phase, abstract -> reallocate -> estimate duration -> fast-forward ->
    restore queue state -> resume packet simulation, until the schedule drains.
    """
    control_cfg = control_cfg or ControlConfig()
    control_cfg.validate()
    engine_cfg = engine_cfg or EngineConfig()
    if abs(engine_cfg.sample_interval - control_cfg.sample_interval) > 1e-15:
        engine_cfg.sample_interval = control_cfg.sample_interval

    engine = PacketEngine(topology, schedule.flows, engine_cfg, seed=seed,
                          dep_gap=dep_gap)
    monitor = StabilityMonitor(control_cfg)
    engine.on_sample = lambda t, bw, qd: monitor.observe(bw, qd) == 1

    phases: list[Phase] = []
    switch_count = 0
    packet_begin = 0.0

    t0 = time.perf_counter()
    while not engine.all_done():
        flagged = engine.run(stop_on_flag=True)
        if not flagged:
            break  # drained in packet mode
        t_start = engine.now
        b_inst = {fid: sum(win) / len(win) for fid, win in monitor.bw.items() if win}
        views, rec = abstract_state(engine, b_inst)
        if not views:
            monitor.reset()
            continue
        try:
            reallocate_bandwidth(views, topology)
        except InfeasibleAllocationError as exc:
            log.warning("switch aborted at t=%.6f: %s", t_start, exc)
            monitor.reset()
            continue
        plan = estimate_steady_duration(views, t_start)
        next_release = _next_pending_release(engine)
        t_end, reason = schedule_flow_to_packet(plan, next_release, control_cfg)
        if t_end is None:
            monitor.reset()
            continue
        duration = t_end - t_start
        moved, finished = fast_forward(views, plan, duration)
        view_by_id = {v.flow_id: v for v in views}
        completions = {}
        for fid in finished:
            delta = compensate_fct(view_by_id[fid], rec.port_depths, topology)
            completions[fid] = t_start + plan.per_flow_tau[fid] + delta
        progress = {fid: rec.flows[fid]["l_cum"] + moved[fid]
                    for fid in moved if fid not in completions}
        if use_restoration:
            overrides, _ = restore_state(plan, engine.port_traces,
                                         engine._switch_ports,
                                         weights=predictor_weights,
                                         persistence_window=control_cfg.window_len)
        else:
            overrides = {p: 0.0 for p in engine._switch_ports}
        pace = {fid: view_by_id[fid].b_re for fid in progress}
        engine.resume_at(t_end, progress, completions, overrides, pace_rates=pace)
        monitor.reset()
        phases.append(Phase(packet_begin, t_start, "packet"))
        phases.append(Phase(t_start, t_end, "flow", reason))
        packet_begin = t_end
        switch_count += 1
    wall = time.perf_counter() - t0

    records = _records_from_engine(engine, "HYBRID")
    jct = job_completion_time(records)
    t_final = max((r.completion_s for r in records), default=packet_begin)
    if t_final > packet_begin or not phases:
        phases.append(Phase(packet_begin, t_final, "packet"))
    flow_time = sum(p.t_end - p.t_begin for p in phases if p.mode == "flow")
    total = jct if jct > 0 else 1.0
    summary = RunSummary(mode="HYBRID", seed=seed, jct=jct, wall_clock=wall,
                         n_flows=len(records), switch_count=switch_count,
                         flow_mode_fraction=flow_time / total,
                         mean_link_throughput=_mean_link_throughput(engine.link_bits, jct),
                         control={"eps_bw": control_cfg.eps_bw,
                                  "eps_q": control_cfg.eps_q,
                                  "window_len": control_cfg.window_len,
                                  "sample_interval": control_cfg.sample_interval,
                                  "n_stable": control_cfg.n_stable,
                                  "min_steady_duration": control_cfg.min_steady_duration,
                                  "max_steady_duration": control_cfg.max_steady_duration})
    return RunResult(records=records, summary=summary, phases=phases,
                     port_traces=engine.port_traces,
                     link_bits_trace=engine.link_bits_trace,
                     flow_bw_trace=engine.flow_bw_trace)


def _next_pending_release(engine: PacketEngine) -> Optional[float]:
    times = [t for (t, _, ev) in engine._heap if ev[0] == _REL]
    return min(times) if times else None
