"""Operator entry point.

Subcommands: run, compare, serve, replay, vpt-report. Every option also
reads an environment variable (flag > env > default); `--config FILE`
supplies defaults from a JSON object keyed by subcommand then option name.

Exit codes: 0 success, 2 scenario/input error, 3 incomplete runs (timeout,
partial outputs kept), 64 usage error.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import click

from .engine import (
    CorruptLog,
    Metrics,
    SimConfig,
    compare_conditions,
    replay as replay_log,
    run as run_sim,
    write_log,
)
from .meshio import save_ply
from .perception import sensor_frame
from .vpt import assess_free_holograms
from .world import ScenarioConfig, SchemaError, load_scenario

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64


def _fail_usage(message: str) -> None:
    click.echo(f"usage error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _load_scenario_or_exit(path: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.from_file(path)
    except (FileNotFoundError, SchemaError) as e:
        click.echo(f"scenario error: {e}", err=True)
        sys.exit(EXIT_SCENARIO)


def _robot_flag(value: str) -> bool:
    if value not in ("on", "off"):
        _fail_usage("--robot must be 'on' or 'off'")
    return value == "on"


def _write_metrics(out_dir: Path, metrics: Metrics) -> None:
    (out_dir / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    with (out_dir / "metrics.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["hologram_id", "delivered_at_s", "delivered_by"])
        for hid, info in sorted(metrics.deliveries.items()):
            writer.writerow([hid, f"{info['time']:.6f}", info["by"]])
        writer.writerow([])
        writer.writerow(["completion_time_s",
                         "" if metrics.completion_time is None
                         else f"{metrics.completion_time:.6f}"])
        writer.writerow(["complete", metrics.complete])
        writer.writerow(["distance_human_m", f"{metrics.distance['human']:.6f}"])
        writer.writerow(["distance_robot_m", f"{metrics.distance['robot']:.6f}"])


class _ConfigFileGroup(click.Group):
    """Reads --config before dispatch and installs it as the default map."""

    def invoke(self, ctx):
        config_path = ctx.params.get("config")
        if config_path:
            try:
                defaults = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as e:
                click.echo(f"config error: {e}", err=True)
                sys.exit(EXIT_SCENARIO)
            ctx.default_map = defaults
        return super().invoke(ctx)


@click.group(cls=_ConfigFileGroup)
@click.option("--config", envvar="HOLOSIM_CONFIG", default=None,
              help="JSON file of option defaults, keyed by subcommand.")
def main(config):
    """Shared-workspace simulator: scripted experiments, live serving, replay."""


@main.command("run")
@click.argument("scenario")
@click.option("--seeds", envvar="HOLOSIM_SEEDS", default=1, show_default=True,
              help="Number of consecutive seeds to run.")
@click.option("--seed-base", envvar="HOLOSIM_SEED_BASE", default=0, show_default=True)
@click.option("--robot", envvar="HOLOSIM_ROBOT", default="on", show_default=True,
              help="Robot assistance: on or off.")
@click.option("--out", envvar="HOLOSIM_OUT", default="runs", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--max-time", envvar="HOLOSIM_MAX_TIME", default=300.0, show_default=True)
@click.option("--dt", envvar="HOLOSIM_DT", default=0.05, show_default=True)
def run_cmd(scenario, seeds, seed_base, robot, out, max_time, dt):
    """Headless runs; writes metrics.json, metrics.csv, events.jsonl per seed."""
    if seeds < 1:
        _fail_usage("--seeds must be at least 1")
    robot_enabled = _robot_flag(robot)
    scn = _load_scenario_or_exit(scenario)
    out_root = Path(out)
    out_root.mkdir(parents=True, exist_ok=True)
    all_metrics = []
    for i in range(seeds):
        seed = seed_base + i
        cfg = SimConfig(dt=dt, max_time=max_time, seed=seed, robot_enabled=robot_enabled)
        metrics, events = run_sim(scn, cfg)
        run_dir = out_root / f"seed_{seed:04d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_log(events, run_dir / "events.jsonl")
        _write_metrics(run_dir, metrics)
        all_metrics.append((seed, metrics))
        status = "complete" if metrics.complete else "INCOMPLETE"
        shown = metrics.completion_time if metrics.completion_time is not None else max_time
        click.echo(f"seed {seed}: {status}, completion_time={shown:.2f}s")

    times = [m.completion_time if m.completion_time is not None else max_time
             for _, m in all_metrics]
    aggregate = {
        "scenario": scn.name,
        "robot_enabled": robot_enabled,
        "seeds": [s for s, _ in all_metrics],
        "mean": statistics.fmean(times),
        "median": statistics.median(times),
        "runs": [{"seed": s, **m.to_dict()} for s, m in all_metrics],
    }
    (out_root / "report.json").write_text(json.dumps(aggregate, indent=2) + "\n")
    with (out_root / "report.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed", "completion_time_s", "complete"])
        for (s, m), t in zip(all_metrics, times):
            writer.writerow([s, f"{t:.6f}", m.complete])
    if not all(m.complete for _, m in all_metrics):
        sys.exit(EXIT_INCOMPLETE)


@main.command("compare")
@click.argument("scenario")
@click.option("--seeds", envvar="HOLOSIM_SEEDS", default=20, show_default=True)
@click.option("--seed-base", envvar="HOLOSIM_SEED_BASE", default=0, show_default=True)
@click.option("--robot-a", envvar="HOLOSIM_ROBOT_A", default="on", show_default=True)
@click.option("--robot-b", envvar="HOLOSIM_ROBOT_B", default="off", show_default=True)
@click.option("--out", envvar="HOLOSIM_OUT", default="comparison", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--max-time", envvar="HOLOSIM_MAX_TIME", default=300.0, show_default=True)
@click.option("--dt", envvar="HOLOSIM_DT", default=0.05, show_default=True)
def compare_cmd(scenario, seeds, seed_base, robot_a, robot_b, out, max_time, dt):
    """Paired comparison of two robot conditions over the same seeds."""
    if seeds < 1:
        _fail_usage("--seeds must be at least 1")
    scn = _load_scenario_or_exit(scenario)
    cfg = SimConfig(dt=dt, max_time=max_time, seed=seed_base)
    report = compare_conditions(scn, cfg, seeds,
                                robot_a=_robot_flag(robot_a), robot_b=_robot_flag(robot_b))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    with (out_dir / "report.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed", "time_a_s", "time_b_s"])
        for row in report.rows:
            writer.writerow([row["seed"], f"{row['time_a']:.6f}", f"{row['time_b']:.6f}"])
    click.echo(f"condition A (robot={'on' if report.summary['a']['robot_enabled'] else 'off'}): "
               f"mean {report.summary['a']['mean']:.1f}s, "
               f"median {report.summary['a']['median']:.1f}s")
    click.echo(f"condition B (robot={'on' if report.summary['b']['robot_enabled'] else 'off'}): "
               f"mean {report.summary['b']['mean']:.1f}s, "
               f"median {report.summary['b']['median']:.1f}s")
    click.echo(f"A faster in {report.summary['a_wins']}/{seeds} paired seeds")
    incomplete = any(not (r["complete_a"] and r["complete_b"]) for r in report.rows)
    if incomplete:
        sys.exit(EXIT_INCOMPLETE)


@main.command("serve")
@click.argument("scenario")
@click.option("--endpoint", envvar="HOLOSIM_ENDPOINT", default="127.0.0.1:8765",
              show_default=True, help="host:port to bind.")
@click.option("--rate", envvar="HOLOSIM_RATE", default=20.0, show_default=True,
              help="Snapshot rate, Hz of sim time.")
@click.option("--seed", envvar="HOLOSIM_SEED", default=0, show_default=True)
@click.option("--max-time", envvar="HOLOSIM_MAX_TIME", default=1e9)
def serve_cmd(scenario, endpoint, rate, seed, max_time):
    """Interactive mode: run the sim and serve the sync protocol over WebSocket."""
    from .server import EndpointBusy, serve

    scn = _load_scenario_or_exit(scenario)
    host, _, port = endpoint.partition(":")
    if not port.isdigit():
        _fail_usage("--endpoint must look like host:port")
    cfg = SimConfig(seed=seed, max_time=max_time)
    click.echo(f"serving {scn.name} on ws://{host}:{port}/ws")
    try:
        serve(scn, cfg, host=host, port=int(port), snapshot_rate_hz=rate)
    except EndpointBusy as e:
        click.echo(f"endpoint busy: {e}", err=True)
        sys.exit(EXIT_SCENARIO)


@main.command("replay")
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False))
def replay_cmd(log_path):
    """Re-run an event log, verifying every entry; prints a summary."""
    try:
        snapshots = sum(1 for _ in replay_log(log_path))
    except CorruptLog as e:
        click.echo(f"corrupt log: {e}", err=True)
        sys.exit(EXIT_SCENARIO)
    click.echo(f"replay ok: {snapshots} snapshots hash-verified")


@main.command("vpt-report")
@click.argument("scenario")
@click.option("--export-sensor", envvar="HOLOSIM_EXPORT_SENSOR", default=None,
              type=click.Path(file_okay=False),
              help="Also write the robot's initial sensor frame (cloud.ply, overlay.json).")
@click.option("--density", envvar="HOLOSIM_DENSITY", default=2000.0, show_default=True,
              help="Point-cloud sampling density for --export-sensor, points/m^2.")
def vpt_report_cmd(scenario, export_sensor, density):
    """Per-hologram view cost assessment at t=0, as JSON on stdout."""
    scn = _load_scenario_or_exit(scenario)
    try:
        w = load_scenario(scn)
    except Exception as e:
        click.echo(f"scenario error: {e}", err=True)
        sys.exit(EXIT_SCENARIO)
    rows = []
    for hid, a in sorted(assess_free_holograms(w).items()):
        rows.append({
            "id": hid,
            "label": w.hologram(hid).label,
            "angle_deg": round(math.degrees(a.angle), 3),
            "occluded": a.occluded,
            "cost": round(a.cost, 6),
            "region": a.region.value,
        })
    click.echo(json.dumps(rows, indent=2))
    if export_sensor:
        out = Path(export_sensor)
        out.mkdir(parents=True, exist_ok=True)
        frame = sensor_frame(w, density=density, seed=scn.seed)
        save_ply(frame.cloud, out / "cloud.ply")
        overlay = [{"id": hid, "polygon": poly.tolist()} for hid, poly in frame.overlay]
        (out / "overlay.json").write_text(json.dumps(overlay, indent=2) + "\n")


if __name__ == "__main__":
    main()
