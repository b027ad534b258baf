"""Command-line scenario runner and comparison harness.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import copy
import csv
import json
import sys
from pathlib import Path

import click
import yaml

from . import orchestrator
from .config import ScenarioConfig, set_by_path
from .core import ConfigurationError
from .metrics import fct_error_p99, records_to_csv, speedup
from .predictor import load_weights
from .workload import FlowSchedule


def _fail_config(exc: Exception):
    click.echo(f"config error: {exc}", err=True)
    sys.exit(2)


def _run_mode(cfg: ScenarioConfig, mode: str):
    topo = cfg.build_topology()
    schedule = cfg.build_schedule(topo)
    gap = cfg.dep_gap()
    if mode == "pls":
        return orchestrator.run_pure_pls(topo, schedule, copy.deepcopy(cfg.engine),
                                         seed=cfg.seed, dep_gap=gap)
    if mode == "fls":
        return orchestrator.run_pure_fls(topo, schedule, seed=cfg.seed, dep_gap=gap)
    weights = load_weights(cfg.predictor_weights) if cfg.predictor_weights else None
    return orchestrator.run_hybrid(topo, schedule, copy.deepcopy(cfg.engine),
                                   copy.deepcopy(cfg.control),
                                   predictor_weights=weights,
                                   use_restoration=cfg.restoration,
                                   seed=cfg.seed, dep_gap=gap)


def _write_artifacts(result, out: Path, mode: str, export_traces: bool):
    out.mkdir(parents=True, exist_ok=True)
    (out / "flows.csv").write_text(records_to_csv(result.records))
    (out / "summary.json").write_text(result.summary.to_json() + "\n")
    if mode == "hybrid":
        with open(out / "phases.jsonl", "w") as fh:
            for p in result.phases:
                fh.write(json.dumps({"t_begin": p.t_begin, "t_end": p.t_end,
                                     "mode": p.mode, "reason": p.reason}) + "\n")
    if export_traces and result.port_traces:
        with open(out / "queue_traces.jsonl", "w") as fh:
            for port, trace in sorted(result.port_traces.items()):
                for t, depth in trace:
                    fh.write(json.dumps({"port": port, "t": t,
                                         "depth_bits": depth}) + "\n")


@click.group()
def main():
    """Hybrid-granularity data-center network simulator."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["pls", "fls", "hybrid"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--export-traces", is_flag=True, default=False)
def run(config_path, mode, seed, out, export_traces):
    """Run one scenario; writes flows.csv, summary.json, phases.jsonl."""
    try:
        cfg = ScenarioConfig.load(config_path)
        if seed is not None:
            cfg.seed = seed
        mode = mode or cfg.mode
    except ConfigurationError as exc:
        _fail_config(exc)
    out_dir = Path(out or cfg.output_dir or "out")
    try:
        result = _run_mode(cfg, mode)
        _write_artifacts(result, out_dir, mode, export_traces)
    except ConfigurationError as exc:
        _fail_config(exc)
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{mode} run complete: JCT {result.summary.jct:.6g} s, "
               f"wall {result.summary.wall_clock:.3f} s -> {out_dir}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--baseline", default="pls", type=click.Choice(["pls", "fls", "hybrid"]))
@click.option("--candidates", default="fls,hybrid")
@click.option("--out", type=click.Path(), default=None)
def compare(config_path, baseline, candidates, out):
    """Run all modes on the identical schedule + seed and report errors."""
    try:
        cfg = ScenarioConfig.load(config_path)
        cand_modes = [c.strip() for c in candidates.split(",") if c.strip()]
        for c in cand_modes:
            if c not in ("pls", "fls", "hybrid"):
                raise ConfigurationError(f"unknown candidate mode {c!r}")
    except ConfigurationError as exc:
        _fail_config(exc)
    out_dir = Path(out or cfg.output_dir or "out")
    try:
        report = run_comparison(cfg, baseline, cand_modes)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    except ConfigurationError as exc:
        _fail_config(exc)
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report, indent=2))


def run_comparison(cfg: ScenarioConfig, baseline: str, cand_modes: list[str]) -> dict:
    base = _run_mode(cfg, baseline)
    report = {"baseline": baseline, "seed": cfg.seed,
              "baseline_jct": base.summary.jct,
              "baseline_wall": base.summary.wall_clock, "candidates": {}}
    for mode in cand_modes:
        res = base if mode == baseline else _run_mode(cfg, mode)
        errs = fct_error_p99(res.records, base.records)
        jct_err = (abs(res.summary.jct - base.summary.jct) / base.summary.jct * 100.0
                   if base.summary.jct > 0 else 0.0)
        thr_err = _throughput_error(res.summary.mean_link_throughput,
                                    base.summary.mean_link_throughput)
        report["candidates"][mode] = {
            "fct_error_pct": errs,
            "jct_error_pct": jct_err,
            "throughput_error_pct": thr_err,
            "jct": res.summary.jct,
            "wall_clock": res.summary.wall_clock,
            "speedup": speedup(res.summary.wall_clock, base.summary.wall_clock),
            "switch_count": res.summary.switch_count,
            "flow_mode_fraction": res.summary.flow_mode_fraction,
        }
    return report


def _throughput_error(cand: dict, base: dict) -> float:
    """Relative error on the busiest baseline link, in percent."""
    if not base:
        return 0.0
    lid = max(base, key=base.get)
    b = base[lid]
    c = cand.get(lid, 0.0)
    return abs(c - b) / b * 100.0 if b > 0 else 0.0


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--vary", multiple=True,
              help="dotted.key=v1,v2,... (repeat for a grid)")
@click.option("--baseline", default="pls")
@click.option("--candidates", default="hybrid")
@click.option("--out", type=click.Path(), default="sweep_out")
def sweep(config_path, vary, baseline, candidates, out):
    """Grid sweep over config keys; one comparison report per grid point."""
    if not vary:
        click.echo("config error: at least one --vary is required", err=True)
        sys.exit(2)
    try:
        raw = yaml.safe_load(Path(config_path).read_text()) or {}
        axes = []
        for spec in vary:
            if "=" not in spec:
                raise ConfigurationError(f"--vary needs key=v1,v2 form, got {spec!r}")
            key, vals = spec.split("=", 1)
            values = [yaml.safe_load(v) for v in vals.split(",") if v != ""]
            if not values:
                raise ConfigurationError(f"--vary {key} has no values")
            axes.append((key, values))
        ScenarioConfig.from_dict(raw)  # validate the base config early
    except ConfigurationError as exc:
        _fail_config(exc)

    points = [[]]
    for key, values in axes:
        points = [p + [(key, v)] for p in points for v in values]

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    cand_modes = [c.strip() for c in candidates.split(",") if c.strip()]
    try:
        for i, assignment in enumerate(points):
            doc = copy.deepcopy(raw)
            for key, v in assignment:
                set_by_path(doc, key, v)
            cfg = ScenarioConfig.from_dict(doc)
            report = run_comparison(cfg, baseline, cand_modes)
            point_dir = out_dir / f"point{i:03d}"
            point_dir.mkdir(exist_ok=True)
            (point_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
            for mode in cand_modes:
                c = report["candidates"][mode]
                rows.append({**{k: v for k, v in assignment}, "mode": mode,
                             "jct": c["jct"], "jct_error_pct": c["jct_error_pct"],
                             "fct_p99_error_pct": c["fct_error_pct"]["p99"],
                             "speedup": c["speedup"]})
    except ConfigurationError as exc:
        _fail_config(exc)
    except Exception as exc:
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(1)

    agg = out_dir / "sweep.csv"
    with open(agg, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"{len(points)} grid points -> {agg}")


@main.command("gen-workload")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="-")
def gen_workload(config_path, out):
    """Dump the generated FlowSchedule as JSONL."""
    try:
        cfg = ScenarioConfig.load(config_path)
        topo = cfg.build_topology()
        schedule = cfg.build_schedule(topo)
    except ConfigurationError as exc:
        _fail_config(exc)
    text = schedule.to_jsonl()
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        click.echo(f"{len(schedule)} flows -> {out}")


@main.command("print-config")
@click.argument("config_path", type=click.Path(exists=True), required=False)
def print_config(config_path):
    """Print the fully-resolved config (defaults included)."""
    try:
        cfg = ScenarioConfig.load(config_path) if config_path else ScenarioConfig()
    except ConfigurationError as exc:
        _fail_config(exc)
    click.echo(cfg.defaults_yaml(), nl=False)


if __name__ == "__main__":
    main()
