"""Granularity transitions: packet state abstracted into flow parameters on
the way down, queue depths predicted and re-materialized on the way back up.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import Topology
from .flow_engine import SteadyFlowView, SteadyPhasePlan
from .predictor import AttentionWeights, predict_attention, predict_persistence

log = logging.getLogger(__name__)


@dataclass
class AbstractionRecord:
    t_start: float
    flows: dict[str, dict]                  # flow_id -> {b_inst, l_cum, remaining}
    port_depths: dict[int, float]           # switch egress port -> bits at t_start
    compensation: dict[str, float] = field(default_factory=dict)  # flow_id -> delta tau


def abstract_state(engine, b_inst: dict[str, float],
                   b_min: Optional[dict[str, float]] = None
                   ) -> tuple[list[SteadyFlowView], AbstractionRecord]:
    """Collapse the packet engine's per-flow progress into steady-flow views.

    b_inst carries the window-mean bandwidth per active flow (from the
    stability monitor). Flows with nothing left to send are excluded.
    """
    views: list[SteadyFlowView] = []
    rec = AbstractionRecord(t_start=engine.now, flows={},
                            port_depths=engine.current_depths())
    for rt in engine.active_flows():
        fid = rt.flow.id
        remaining = rt.flow.size - rt.delivered
        if remaining <= 0:
            log.warning("flow %s already complete at abstraction time; excluded", fid)
            continue
        if fid not in b_inst:
            continue
        floor = b_min.get(fid, rt.flow.min_bandwidth) if b_min else rt.flow.min_bandwidth
        # sampled window means can exceed line rate by a packet's worth of
        # quantization; physically the path capacity is a hard ceiling
        cap = min(engine._cap[lid] for lid in rt.path)
        view = SteadyFlowView(flow_id=fid, remaining=remaining,
                              b_inst=min(b_inst[fid], cap), path=rt.path,
                              weight=rt.flow.weight, b_min=floor)
        views.append(view)
        rec.flows[fid] = {"b_inst": b_inst[fid], "l_cum": rt.delivered,
                          "remaining": remaining}
    _rescale_infeasible_floors(views, engine._cap)
    return views, rec


def _rescale_infeasible_floors(views: list[SteadyFlowView], caps: dict[int, float]):
    """Scale down b_init floors on any link whose measured load exceeds its
    capacity (sampling noise can overshoot by a packet's worth per flow)."""
    load: dict[int, float] = {}
    for v in views:
        for lid in v.path:
            load[lid] = load.get(lid, 0.0) + v.b_init
    for v in views:
        factor = min((caps[lid] / load[lid] for lid in v.path
                      if load[lid] > caps[lid]), default=1.0)
        if factor < 1.0:
            v.b_init *= factor


def compensate_fct(view: SteadyFlowView, port_depths: dict[int, float],
                   topology: Topology) -> float:
    """Equivalent queuing delay: sum of Q_h / C_h over the switch egress hops
    of the flow's path, using the depths snapshotted at T_start."""
    delta = 0.0
    for lid in view.path:
        link = topology.link_by_id[lid]
        if link.src in topology.tiers:  # switch egress hop
            delta += port_depths.get(lid, 0.0) / link.capacity
    return delta


def restore_state(plan: SteadyPhasePlan, traces: dict[int, list[tuple[float, float]]],
                  ports: list[int],
                  weights: Optional[AttentionWeights] = None,
                  persistence_window: int = 10) -> tuple[dict[int, float], int]:
    """Predict per-port queue depth at the phase end and build the override map.

    Uses the attention predictor when weights are given, otherwise the
    persistence baseline. Predictions are clamped to [0, 2 * max depth seen];
    returns (overrides, clamp count). Ports without any trace fall back to a
    zero-history persistence prediction (0) with a warning.
    """
    overrides: dict[int, float] = {}
    clamped = 0
    for port in ports:
        trace = traces.get(port) or []
        depths = [d for (t, d) in trace if t <= plan.t_start]
        if not depths:
            log.warning("no queue trace for port %s; assuming empty queue", port)
            overrides[port] = 0.0
            continue
        if weights is not None:
            pred = predict_attention(depths, weights)
        else:
            pred = predict_persistence(depths, persistence_window)
        hi = 2.0 * max(depths)
        clip = min(max(pred, 0.0), hi)
        if clip != pred:
            clamped += 1
        overrides[port] = clip
    return overrides, clamped
