"""Control layer: steady-state detection (packet->flow) and steady-phase
end-point scheduling (flow->packet).

A round is stable only if every active flow's bandwidth variation stays
under eps_bw AND (checked only then, as a safeguard) every monitored port's
queue-depth variation stays under eps_q. The switch fires after n_stable
consecutive stable rounds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import ConfigurationError
from .flow_engine import SteadyPhasePlan


@dataclass
class ControlConfig:
    eps_bw: float = 4e9            # bits/s (2% of a 200 Gb/s link by default)
    eps_q: float = 16_000 * 8.0    # bits
    window_len: int = 10
    sample_interval: float = 50e-6
    n_stable: int = 3
    min_steady_duration: float = 500e-6   # 10 * sample_interval
    max_steady_duration: float = 100e-3

    def validate(self):
        # 0 is allowed as a degenerate value: the strict v < eps test then
        # never passes, which disables granularity switching entirely
        if self.eps_bw < 0 or self.eps_q < 0:
            raise ConfigurationError("eps_bw and eps_q must be >= 0")
        if self.window_len < 2:
            raise ConfigurationError("window_len must be >= 2")
        if self.sample_interval <= 0:
            raise ConfigurationError("sample_interval must be > 0")
        if self.n_stable < 1:
            raise ConfigurationError("n_stable must be >= 1")
        if not (0 < self.min_steady_duration <= self.max_steady_duration):
            raise ConfigurationError(
                "need 0 < min_steady_duration <= max_steady_duration")


def check_stability(samples, eps: float) -> tuple[bool, float]:
    """Variation v = max - min over the window; stable iff v < eps.

    Fewer than two samples is insufficient data and counts as unstable.
    """
    samples = list(samples)
    if len(samples) < 2:
        return False, float("inf")
    v = max(samples) - min(samples)
    return v < eps, v


def check_bandwidth_stability(samples, eps_bw: float) -> tuple[bool, float]:
    return check_stability(samples, eps_bw)


def check_queue_stability(samples, eps_q: float) -> tuple[bool, float]:
    return check_stability(samples, eps_q)


class StabilityMonitor:
    """Sliding windows of bandwidth/queue samples plus the stable-round counter."""

    def __init__(self, config: ControlConfig):
        config.validate()
        self.cfg = config
        self.bw: dict[str, deque] = {}
        self.q: dict[int, deque] = {}
        self.c_stable = 0

    def reset(self):
        self.bw.clear()
        self.q.clear()
        self.c_stable = 0

    def observe(self, flow_bw: dict[str, float], port_depth: dict[int, float]) -> int:
        """Feed one sample round; returns the switch flag (1 = switch)."""
        wl = self.cfg.window_len
        for fid, b in flow_bw.items():
            win = self.bw.get(fid)
            if win is None:
                win = self.bw[fid] = deque(maxlen=wl)
            win.append(b)
        # drop windows of flows that are no longer active
        for fid in list(self.bw):
            if fid not in flow_bw:
                del self.bw[fid]
        for pid, d in port_depth.items():
            win = self.q.get(pid)
            if win is None:
                win = self.q[pid] = deque(maxlen=wl)
            win.append(d)
        return self.decide(flow_bw, port_depth)

    def decide(self, flow_bw: dict[str, float], port_depth: dict[int, float]) -> int:
        stable = bool(flow_bw)  # an empty active set has nothing to switch for
        for fid in flow_bw:
            ok, _ = check_bandwidth_stability(self.bw[fid], self.cfg.eps_bw)
            if not ok:
                stable = False
                break
        if stable:  # queue safeguard, evaluated only when all flows pass
            for pid in port_depth:
                ok, _ = check_queue_stability(self.q[pid], self.cfg.eps_q)
                if not ok:
                    stable = False
                    break
        if stable:
            self.c_stable += 1
        else:
            self.c_stable = 0
        return 1 if self.c_stable >= self.cfg.n_stable else 0


def schedule_flow_to_packet(plan: SteadyPhasePlan, next_release: Optional[float],
                            config: ControlConfig) -> tuple[Optional[float], str]:
    """Pick the steady-phase end point T_end, possibly truncated.

    Returns (t_end, reason) with reason in {flow_finish, new_arrival, cap},
    or (None, "veto") when the resulting phase would be shorter than
    min_steady_duration (stay at packet granularity).
    """
    t_end = plan.t_end
    reason = "flow_finish"
    if next_release is not None and next_release < t_end:
        t_end = next_release
        reason = "new_arrival"
    cap_end = plan.t_start + config.max_steady_duration
    if cap_end < t_end:
        t_end = cap_end
        reason = "cap"
    if t_end - plan.t_start < config.min_steady_duration:
        return None, "veto"
    return t_end, reason
