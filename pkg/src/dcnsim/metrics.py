"""Fidelity and efficiency metrics: per-flow FCT error percentiles against a
baseline run, JCT, link throughput, wall-clock speedup."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np


@dataclass
class FlowRecord:
    id: str
    src: str
    dst: str
    size_bits: float
    release_s: float
    start_s: float
    completion_s: float
    mode: str  # PLS | FLS | HYBRID

    @property
    def fct(self) -> float:
        return self.completion_s - self.release_s


@dataclass
class RunSummary:
    mode: str
    seed: int
    jct: float
    wall_clock: float
    n_flows: int
    switch_count: int = 0
    flow_mode_fraction: float = 0.0
    mean_link_throughput: dict = field(default_factory=dict)
    control: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def job_completion_time(records: list[FlowRecord]) -> float:
    if not records:
        return 0.0
    return max(r.completion_s for r in records) - min(r.release_s for r in records)


def fct_errors(candidate: list[FlowRecord], baseline: list[FlowRecord]) -> np.ndarray:
    cand = {r.id: r for r in candidate}
    base = {r.id: r for r in baseline}
    if set(cand) != set(base):
        raise ValueError("candidate and baseline flow-id sets differ")
    errs = []
    for fid, b in base.items():
        if b.fct <= 0:
            raise ValueError(f"baseline flow {fid} has non-positive FCT")
        errs.append(abs(cand[fid].fct - b.fct) / b.fct)
    return np.asarray(errs)


def fct_error_p99(candidate: list[FlowRecord],
                  baseline: list[FlowRecord]) -> dict[str, float]:
    """Relative per-flow FCT errors vs the baseline, in percent.

    p99 uses linear interpolation between order statistics; max and mean are
    reported alongside since the reference tables quote both.
    """
    errs = fct_errors(candidate, baseline)
    return {
        "p99": float(np.percentile(errs, 99)) * 100.0,
        "max": float(errs.max()) * 100.0,
        "mean": float(errs.mean()) * 100.0,
    }


def throughput(link_bits_trace: list[tuple[float, float]],
               t0: Optional[float] = None, t1: Optional[float] = None
               ) -> tuple[list[tuple[float, float]], float]:
    """Per-interval delivered rate series plus the interval mean for one link.

    Input is a (t, cumulative bits serialized) trace.
    """
    pts = [(t, c) for (t, c) in link_bits_trace
           if (t0 is None or t >= t0) and (t1 is None or t <= t1)]
    if len(pts) < 2:
        raise ValueError("trace does not cover the requested interval")
    series = []
    for (ta, ca), (tb, cb) in zip(pts, pts[1:]):
        if tb > ta:
            series.append((tb, (cb - ca) / (tb - ta)))
    span = pts[-1][0] - pts[0][0]
    mean = (pts[-1][1] - pts[0][1]) / span if span > 0 else 0.0
    return series, mean


def speedup(candidate_wall: float, baseline_wall: float) -> float:
    if candidate_wall <= 0 or baseline_wall <= 0:
        raise ValueError("wall-clock times must be > 0")
    return baseline_wall / candidate_wall


CSV_COLUMNS = ["id", "src", "dst", "size_bits", "release_s", "completion_s", "mode"]


def records_to_csv(records: list[FlowRecord]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: r.id):
        w.writerow([r.id, r.src, r.dst, repr(r.size_bits), repr(r.release_s),
                    repr(r.completion_s), r.mode])
    return out.getvalue()


def records_from_csv(text: str) -> list[FlowRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [FlowRecord(id=r["id"], src=r["src"], dst=r["dst"],
                       size_bits=float(r["size_bits"]),
                       release_s=float(r["release_s"]), start_s=float(r["release_s"]),
                       completion_s=float(r["completion_s"]), mode=r["mode"])
            for r in rows]
