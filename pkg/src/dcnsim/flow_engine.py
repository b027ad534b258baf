"""Flow-granularity engine: weighted max-min bandwidth reallocation and
analytic fast-forward through steady phases.

Single shared link reduces to: B_re = B_init + residual * w_j / sum(w).
Multiple links generalize by weighted progressive filling: iteratively
saturate the most-constrained link, freeze its flows, redistribute.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import Topology


class InfeasibleAllocationError(RuntimeError):
    """Initial rates already exceed some link capacity (broken abstraction)."""


@dataclass
class SteadyFlowView:
    flow_id: str
    remaining: float            # bits left to send (L_j)
    b_inst: float               # measured bandwidth at abstraction time
    path: tuple[int, ...]       # link ids
    weight: float = 1.0
    b_min: float = float("inf")
    b_init: float = field(init=False)
    b_re: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.b_init = min(self.b_inst, self.b_min)


@dataclass
class SteadyPhasePlan:
    t_start: float
    tau_steady: float
    per_flow_tau: dict[str, float]
    earliest: list[str]

    @property
    def t_end(self) -> float:
        return self.t_start + self.tau_steady


def reallocate_bandwidth(flows: list[SteadyFlowView], topology: Topology,
                         rel_tol: float = 1e-12) -> None:
    """Assign b_re to every view in place via weighted progressive filling.

    Every flow starts at its b_init floor; residual link capacity is then
    distributed in proportion to priority weights, freezing flows as their
    bottleneck links saturate. Raises InfeasibleAllocationError if the
    floors alone overload a link.
    """
    caps = {l.id: l.capacity for l in topology.links}
    on_link: dict[int, list[SteadyFlowView]] = {}
    for v in flows:
        for lid in v.path:
            on_link.setdefault(lid, []).append(v)

    rate = {v.flow_id: v.b_init for v in flows}
    for lid, members in on_link.items():
        load = sum(rate[v.flow_id] for v in members)
        if load > caps[lid] * (1.0 + 1e-9):
            raise InfeasibleAllocationError(
                f"initial rates {load:.3e} exceed capacity {caps[lid]:.3e} on link {lid}")

    frozen: set[str] = set()
    # flows with zero weight can never grow beyond their floor
    for v in flows:
        if v.weight == 0.0:
            frozen.add(v.flow_id)

    while True:
        grow = [v for v in flows if v.flow_id not in frozen]
        if not grow:
            break
        # fair per-unit-weight increment each constraining link allows
        delta = None
        for lid, members in on_link.items():
            wsum = sum(v.weight for v in members if v.flow_id not in frozen)
            if wsum <= 0.0:
                continue
            headroom = caps[lid] - sum(rate[v.flow_id] for v in members)
            inc = max(0.0, headroom) / wsum
            if delta is None or inc < delta:
                delta = inc
        if delta is None:
            break  # growing flows sit only on links with zero growable weight
        for v in grow:
            rate[v.flow_id] += delta * v.weight
        # freeze flows on links that are now saturated
        for lid, members in on_link.items():
            load = sum(rate[v.flow_id] for v in members)
            if load >= caps[lid] * (1.0 - rel_tol):
                for v in members:
                    frozen.add(v.flow_id)

    for v in flows:
        v.b_re = rate[v.flow_id]


def estimate_steady_duration(flows: list[SteadyFlowView], t_start: float,
                             tie_tol: float = 1e-12) -> SteadyPhasePlan:
    """Steady-phase length = remaining time of the earliest finishing flow."""
    if not flows:
        raise ValueError("empty steady flow set")
    taus = {}
    for v in flows:
        if v.b_re <= 0.0:
            raise ValueError(f"flow {v.flow_id} has non-positive reallocated bandwidth")
        taus[v.flow_id] = v.remaining / v.b_re
    tau_steady = min(taus.values())
    earliest = [fid for fid, tau in taus.items()
                if tau <= tau_steady * (1.0 + tie_tol)]
    return SteadyPhasePlan(t_start=t_start, tau_steady=tau_steady,
                           per_flow_tau=taus, earliest=earliest)


def fast_forward(flows: list[SteadyFlowView], plan: SteadyPhasePlan,
                 duration: Optional[float] = None) -> tuple[dict[str, float], list[str]]:
    """Advance every flow by b_re * duration (clamped to its remaining size).

    Returns (per-flow bits transferred, ids of flows that finished). With the
    full plan duration the earliest finishers complete exactly.
    """
    d = plan.tau_steady if duration is None else duration
    if d <= 0:
        raise ValueError("fast_forward needs a positive duration")
    moved: dict[str, float] = {}
    finished: list[str] = []
    for v in flows:
        step = v.b_re * d
        if step >= v.remaining or plan.per_flow_tau[v.flow_id] <= d * (1.0 + 1e-12):
            moved[v.flow_id] = v.remaining
            v.remaining = 0.0
            finished.append(v.flow_id)
        else:
            moved[v.flow_id] = step
            v.remaining -= step
    return moved, finished
