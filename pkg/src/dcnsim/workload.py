"""Flow-schedule generators for LLM-training communication patterns.

Collectives are decomposed into point-to-point flow steps (ring all-reduce,
pairwise all-to-all) so every engine operates on plain flows. Sizes derive
from model hyperparameters and are overridable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from graphlib import TopologicalSorter, CycleError
from typing import Optional

from .core import ConfigurationError, Flow


@dataclass
class ModelSpec:
    n_params: int = 175_000_000_000
    hidden_dim: int = 12288
    n_layers: int = 96
    seq_len: int = 2048
    micro_batch: int = 1
    bytes_per_elem: int = 2

    def validate(self):
        for name in ("n_params", "hidden_dim", "n_layers", "seq_len",
                     "micro_batch", "bytes_per_elem"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"ModelSpec.{name} must be >= 1")

    def activation_bits(self) -> float:
        """Per-microbatch hidden activation size."""
        return self.micro_batch * self.seq_len * self.hidden_dim * self.bytes_per_elem * 8

    def gradient_bits(self) -> float:
        return self.n_params * self.bytes_per_elem * 8


@dataclass
class ParallelismSpec:
    strategy: str = "pp"  # pp | tp | dp | ep | mixed
    pp_stages: int = 1
    tp_degree: int = 1
    dp_degree: int = 1
    ep_degree: int = 1
    n_microbatches: int = 1
    n_iterations: int = 1
    compute_gap: float = 0.0     # release offset after each dependency completes
    iteration_gap: float = 0.0   # extra release offset between DP iterations
    ep_chunk_bytes: float = 1e6

    def validate(self):
        for name in ("pp_stages", "tp_degree", "dp_degree", "ep_degree",
                     "n_microbatches", "n_iterations"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"ParallelismSpec.{name} must be >= 1")
        if self.strategy not in ("pp", "tp", "dp", "ep", "mixed"):
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")


@dataclass
class FlowSchedule:
    flows: list[Flow] = field(default_factory=list)

    def __post_init__(self):
        self.check_acyclic()

    def check_acyclic(self):
        graph = {f.id: list(f.deps) for f in self.flows}
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise ConfigurationError(f"dependency cycle in schedule: {exc}") from exc
        ids = set(graph)
        for f in self.flows:
            if f.release_time < 0:
                raise ConfigurationError(f"flow {f.id}: negative release time")
            for d in f.deps:
                if d not in ids:
                    raise ConfigurationError(f"flow {f.id}: unknown dependency {d!r}")

    def __len__(self) -> int:
        return len(self.flows)

    def to_jsonl(self) -> str:
        lines = []
        for f in self.flows:
            rec = {"id": f.id, "src": f.src, "dst": f.dst, "size_bits": f.size,
                   "release_s": f.release_time, "deps": list(f.deps), "weight": f.weight}
            lines.append(json.dumps(rec))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "FlowSchedule":
        flows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            flows.append(Flow(id=rec["id"], src=rec["src"], dst=rec["dst"],
                              size=float(rec["size_bits"]),
                              release_time=float(rec.get("release_s", 0.0)),
                              weight=float(rec.get("weight", 1.0)),
                              deps=tuple(rec.get("deps", ()))))
        return cls(flows)


def _ring_all_reduce(hosts: list[str], total_bits: float, id_prefix: str,
                     release: float = 0.0, prev_tail: Optional[list[str]] = None,
                     weight: float = 1.0) -> tuple[list[Flow], list[str]]:
    """Decompose one ring all-reduce over `hosts` into 2(G-1) dependent steps.

    Step s emits G flows of size total_bits/G between ring neighbors; flow
    (s, i) depends on flow (s-1, i-1 mod G), i.e. the chunk it forwards.
    Returns the flows plus the ids of the final step (for chaining).
    """
    g = len(hosts)
    if g < 2:
        return [], prev_tail or []
    per_flow = total_bits / g
    flows: list[Flow] = []
    prev_step_ids: list[str] = []
    for s in range(2 * (g - 1)):
        step_ids = []
        for i in range(g):
            fid = f"{id_prefix}.s{s}.r{i}"
            if s > 0:
                deps = (prev_step_ids[(i - 1) % g],)
            elif prev_tail:
                deps = ((prev_tail)[(i - 1) % len(prev_tail)],)
            else:
                deps = ()
            flows.append(Flow(id=fid, src=hosts[i], dst=hosts[(i + 1) % g],
                              size=per_flow, release_time=release,
                              weight=weight, deps=deps))
            step_ids.append(fid)
        prev_step_ids = step_ids
    return flows, prev_step_ids


def _pp_flows(model: ModelSpec, n_stages: int, n_microbatches: int,
              stage_hosts: list[str], id_prefix: str = "pp",
              size_bits: Optional[float] = None) -> list[Flow]:
    """1F1B pipeline: forward activation + backward gradient flows per
    adjacent stage pair and microbatch, with per-link serialization."""
    size = size_bits if size_bits is not None else model.activation_bits()
    flows: list[Flow] = []

    def fid(kind: str, m: int, i: int) -> str:
        return f"{id_prefix}.m{m}.{kind}{i}"

    for m in range(n_microbatches):
        # forward: stage i -> i+1
        for i in range(n_stages - 1):
            deps = []
            if i > 0:
                deps.append(fid("f", m, i - 1))
            if m > 0:
                deps.append(fid("f", m - 1, i))  # one microbatch at a time per link
            flows.append(Flow(id=fid("f", m, i), src=stage_hosts[i],
                              dst=stage_hosts[i + 1], size=size, deps=tuple(deps)))
        # backward: stage i -> i-1, i from n_stages-1 down to 1
        for i in range(n_stages - 1, 0, -1):
            deps = []
            if i == n_stages - 1:
                deps.append(fid("f", m, n_stages - 2))
            else:
                deps.append(fid("b", m, i + 1))
            if m > 0:
                deps.append(fid("b", m - 1, i))
            flows.append(Flow(id=fid("b", m, i), src=stage_hosts[i],
                              dst=stage_hosts[i - 1], size=size, deps=tuple(deps)))
    return flows


def gen_pp(model: ModelSpec, par: ParallelismSpec, placement: list[str],
           size_bits: Optional[float] = None) -> FlowSchedule:
    model.validate()
    par.validate()
    if par.pp_stages > len(placement):
        raise ConfigurationError(
            f"{par.pp_stages} pipeline stages but only {len(placement)} hosts placed")
    hosts = placement[:par.pp_stages]
    if len(set(hosts)) != len(hosts):
        raise ConfigurationError("pipeline placement must map stages to distinct hosts")
    return FlowSchedule(_pp_flows(model, par.pp_stages, par.n_microbatches,
                                  hosts, size_bits=size_bits))


def gen_dp(model: ModelSpec, par: ParallelismSpec, placement: list[str],
           size_bits: Optional[float] = None) -> FlowSchedule:
    """Per iteration, a ring all-reduce of the full gradient across the DP group."""
    model.validate()
    par.validate()
    g = par.dp_degree
    if g > len(placement):
        raise ConfigurationError(f"dp_degree {g} exceeds {len(placement)} placed hosts")
    hosts = placement[:g]
    total = size_bits if size_bits is not None else model.gradient_bits()
    flows: list[Flow] = []
    tail: list[str] = []
    for it in range(par.n_iterations):
        step, tail = _ring_all_reduce(hosts, total, f"dp.it{it}",
                                      release=it * par.iteration_gap, prev_tail=tail)
        flows.extend(step)
    return FlowSchedule(flows)


def gen_tp(model: ModelSpec, par: ParallelismSpec, placement: list[str],
           size_bits: Optional[float] = None) -> FlowSchedule:
    """Per layer and microbatch, one ring all-reduce of the activation tensor
    over the TP group. Successive all-reduces chain densely."""
    model.validate()
    par.validate()
    g = par.tp_degree
    if g > len(placement):
        raise ConfigurationError(f"tp_degree {g} exceeds {len(placement)} placed hosts")
    hosts = placement[:g]
    total = size_bits if size_bits is not None else model.activation_bits()
    flows: list[Flow] = []
    tail: list[str] = []
    k = 0
    for m in range(par.n_microbatches):
        for layer in range(model.n_layers):
            step, tail = _ring_all_reduce(hosts, total, f"tp.ar{k}",
                                          release=k * par.compute_gap, prev_tail=tail)
            flows.extend(step)
            k += 1
    return FlowSchedule(flows)


def gen_ep_all_to_all(par: ParallelismSpec, chunk_bytes: float,
                      placement: list[str]) -> FlowSchedule:
    """E*(E-1) simultaneous flows of `chunk_bytes` between all ordered pairs."""
    par.validate()
    e = par.ep_degree
    if e > len(placement):
        raise ConfigurationError(f"ep_degree {e} exceeds {len(placement)} placed hosts")
    hosts = placement[:e]
    flows = []
    for i in range(e):
        for j in range(e):
            if i == j:
                continue
            flows.append(Flow(id=f"ep.{i}to{j}", src=hosts[i], dst=hosts[j],
                              size=chunk_bytes * 8))
    return FlowSchedule(flows)


def gen_mixed(model: ModelSpec, par: ParallelismSpec, placement: list[str],
              size_bits: Optional[float] = None) -> FlowSchedule:
    """Compose TP within stage groups, PP across stage leaders per replica,
    and a DP all-reduce at the iteration boundary gated on all PP backward
    flows. Optional EP all-to-all per replica is interleaved at release 0.

    Host layout: index(stage p, tp t, dp d) = d*(pp*tp) + p*tp + t.
    """
    model.validate()
    par.validate()
    pp, tp, dp = par.pp_stages, par.tp_degree, par.dp_degree
    need = pp * tp * dp
    if need > len(placement):
        raise ConfigurationError(
            f"pp*tp*dp = {need} hosts required, only {len(placement)} placed")

    def host(p: int, t: int, d: int) -> str:
        return placement[d * (pp * tp) + p * tp + t]

    flows: list[Flow] = []
    backward_ids: list[str] = []

    for d in range(dp):
        stage_hosts = [host(p, 0, d) for p in range(pp)]
        if pp >= 2:
            pp_part = _pp_flows(model, pp, par.n_microbatches, stage_hosts,
                                id_prefix=f"rep{d}.pp", size_bits=size_bits)
            flows.extend(pp_part)
            backward_ids.extend(f.id for f in pp_part
                                if f.id.rsplit(".", 1)[-1].startswith("b"))

    if tp >= 2:
        for d in range(dp):
            for p in range(pp):
                group = [host(p, t, d) for t in range(tp)]
                tail: list[str] = []
                k = 0
                for m in range(par.n_microbatches):
                    for layer in range(model.n_layers):
                        step, tail = _ring_all_reduce(
                            group, model.activation_bits(),
                            f"rep{d}.st{p}.tp.ar{k}", prev_tail=tail)
                        flows.extend(step)
                        k += 1

    if dp >= 2:
        shard = model.gradient_bits() / (pp * tp)
        gate = tuple(backward_ids)
        for p in range(pp):
            for t in range(tp):
                group = [host(p, t, d) for d in range(dp)]
                step, _ = _ring_all_reduce(group, shard, f"st{p}.t{t}.dpar")
                if gate:
                    for f in step:
                        if not f.deps:  # step 0 waits on the iteration boundary
                            f.deps = gate
                flows.extend(step)

    if par.strategy == "mixed" and par.ep_degree >= 2:
        e = min(par.ep_degree, pp * tp)
        for d in range(dp):
            group = [placement[d * (pp * tp) + i] for i in range(e)]
            for i in range(e):
                for j in range(e):
                    if i != j:
                        flows.append(Flow(id=f"rep{d}.ep.{i}to{j}", src=group[i],
                                          dst=group[j], size=par.ep_chunk_bytes * 8))

    return FlowSchedule(flows)


def generate(model: ModelSpec, par: ParallelismSpec, placement: list[str],
             size_bits: Optional[float] = None) -> FlowSchedule:
    """Dispatch on par.strategy."""
    if par.strategy == "pp":
        return gen_pp(model, par, placement, size_bits)
    if par.strategy == "dp":
        return gen_dp(model, par, placement, size_bits)
    if par.strategy == "tp":
        return gen_tp(model, par, placement, size_bits)
    if par.strategy == "ep":
        return gen_ep_all_to_all(par, par.ep_chunk_bytes, placement)
    if par.strategy == "mixed":
        return gen_mixed(model, par, placement, size_bits)
    raise ConfigurationError(f"unknown strategy {par.strategy!r}")
