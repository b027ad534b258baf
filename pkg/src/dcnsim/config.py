"""Scenario configuration: a single YAML file with sections mirroring the
module configs. Unknown keys are rejected so typos fail loudly."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .control import ControlConfig
from .core import ConfigurationError, Topology, build_leaf_spine
from .packet_engine import EngineConfig
from .workload import FlowSchedule, ModelSpec, ParallelismSpec, generate

TOPOLOGY_KEYS = {"leaves", "spines", "hosts_per_leaf", "capacity_bps", "latency_s"}
WORKLOAD_KEYS = {"strategy", "model", "parallelism", "flow_size_bits",
                 "placement", "schedule_file"}
CONTROL_KEYS = {"eps_bw", "eps_q", "window_len", "sample_interval", "n_stable",
                "min_steady_duration", "max_steady_duration"}
ENGINE_KEYS = {"mtu_bytes", "ecn_k_bits", "dctcp_g", "init_window_pkts",
               "slow_start", "sample_interval"}
TOP_KEYS = {"topology", "workload", "control", "engine", "mode", "seed",
            "output_dir", "predictor_weights", "restoration"}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass
class ScenarioConfig:
    topology: dict = field(default_factory=lambda: {
        "leaves": 2, "spines": 2, "hosts_per_leaf": 4,
        "capacity_bps": 200e9, "latency_s": 10e-6})
    workload: dict = field(default_factory=lambda: {"strategy": "pp"})
    control: ControlConfig = field(default_factory=ControlConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    mode: str = "hybrid"
    seed: int = 0
    output_dir: Optional[str] = None
    predictor_weights: Optional[str] = None
    restoration: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("config root must be a mapping")
        _check_keys(doc, TOP_KEYS, "config root")
        cfg = cls()

        topo = dict(cfg.topology)
        topo.update(doc.get("topology", {}))
        _check_keys(doc.get("topology", {}), TOPOLOGY_KEYS, "topology")
        cfg.topology = topo

        wl = doc.get("workload", {})
        _check_keys(wl, WORKLOAD_KEYS, "workload")
        if "model" in wl:
            _check_keys(wl["model"], {f.name for f in dataclasses.fields(ModelSpec)},
                        "workload.model")
        if "parallelism" in wl:
            _check_keys(wl["parallelism"],
                        {f.name for f in dataclasses.fields(ParallelismSpec)},
                        "workload.parallelism")
        cfg.workload = {"strategy": "pp", **wl}

        ctl = doc.get("control", {})
        _check_keys(ctl, CONTROL_KEYS, "control")
        # default eps_bw tracks link capacity (2%) unless given explicitly
        defaults = ControlConfig(eps_bw=0.02 * topo["capacity_bps"])
        cfg.control = dataclasses.replace(defaults, **ctl)
        cfg.control.validate()

        eng = doc.get("engine", {})
        _check_keys(eng, ENGINE_KEYS, "engine")
        cfg.engine = dataclasses.replace(EngineConfig(), **eng)
        cfg.engine.validate()
        # engine sampling follows the control cadence unless pinned
        if "sample_interval" not in eng:
            cfg.engine.sample_interval = cfg.control.sample_interval

        cfg.mode = doc.get("mode", "hybrid")
        if cfg.mode not in ("pls", "fls", "hybrid"):
            raise ConfigurationError(f"mode must be pls|fls|hybrid, got {cfg.mode!r}")
        cfg.seed = int(doc.get("seed", 0))
        cfg.output_dir = doc.get("output_dir")
        cfg.predictor_weights = doc.get("predictor_weights")
        cfg.restoration = bool(doc.get("restoration", True))
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        text = Path(path).read_text()
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
        return cls.from_dict(doc)

    def build_topology(self) -> Topology:
        t = self.topology
        return build_leaf_spine(int(t["leaves"]), int(t["spines"]),
                                int(t["hosts_per_leaf"]),
                                float(t["capacity_bps"]), float(t["latency_s"]))

    def build_schedule(self, topology: Topology) -> FlowSchedule:
        wl = self.workload
        if wl.get("schedule_file"):
            return FlowSchedule.from_jsonl(Path(wl["schedule_file"]).read_text())
        model = ModelSpec(**wl.get("model", {}))
        par = ParallelismSpec(strategy=wl.get("strategy", "pp"),
                              **wl.get("parallelism", {}))
        placement = wl.get("placement") or topology.hosts
        for h in placement:
            if h not in topology.host_leaf:
                raise ConfigurationError(f"placement names unknown host {h!r}")
        return generate(model, par, placement,
                        size_bits=wl.get("flow_size_bits"))

    def dep_gap(self) -> float:
        return float(self.workload.get("parallelism", {}).get("compute_gap", 0.0))

    def defaults_yaml(self) -> str:
        doc = {
            "topology": self.topology,
            "workload": self.workload,
            "control": dataclasses.asdict(self.control),
            "engine": dataclasses.asdict(self.engine),
            "mode": self.mode,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "predictor_weights": self.predictor_weights,
            "restoration": self.restoration,
        }
        return yaml.safe_dump(doc, sort_keys=True)


def set_by_path(doc: dict, dotted: str, value: Any):
    """Set config key like workload.parallelism.dp_degree on a raw dict."""
    parts = dotted.split(".")
    cur = doc
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise ConfigurationError(f"cannot descend into {p!r} of {dotted!r}")
    cur[parts[-1]] = value
