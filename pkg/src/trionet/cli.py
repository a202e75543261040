"""Command-line surface: simulate, sweep, analyze, replay.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 replay mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone

from . import __version__
from .dynamics import Game
from .experiments import run_sweep, run_trial
from .io import (
    ConfigError,
    RunManifest,
    config_digest,
    emit_summary,
    emit_trajectory,
    file_digest,
    format_config,
    parse_config,
    read_summary,
)

TRAJECTORY_EVERY = 100


class ReplayMismatch(RuntimeError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trionet",
        description="Monte Carlo simulator for reinforcement-driven trio network formation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "run one trial and record its trajectory"),
        ("sweep", "run the full config grid and write summary.csv + manifest.json"),
        ("analyze", "compute scaling fits and attachment tables from an existing summary"),
        ("replay", "re-run a manifest and verify output digests"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", help="path to a config file")
        cmd.add_argument("--out", required=True, help="run directory")
        cmd.add_argument("--seed", type=int, help="override the config master seed")
        cmd.add_argument("--threads", type=int, default=1, help="parallel trial workers")
        cmd.add_argument("--trials", type=int, help="override trials per cell")
        cmd.add_argument("--horizon", type=int, help="override the step horizon")
    return parser


def _load_cells(args) -> list:
    if not args.config:
        raise ConfigError("line 0: --config is required for this command")
    with open(args.config) as fh:
        cells = parse_config(fh.read())
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if overrides:
        cells = [replace(cell, **overrides) for cell in cells]
    return cells


def _cmd_simulate(args) -> int:
    cells = _load_cells(args)
    os.makedirs(args.out, exist_ok=True)
    cell = cells[0]
    config = replace(cell.trial_config(0), record_trajectory=True)
    points: list[dict] = []
    result = run_trial(
        config, trajectory_sink=points.append, trajectory_every=TRAJECTORY_EVERY
    )
    emit_trajectory(points, os.path.join(args.out, "trajectory.jsonl"))
    payload = {
        "game": cell.model.game.value,
        "N": cell.model.n_agents,
        "x": cell.model.discount,
        "rule": cell.model.rule.value,
        "trapped": result.trapped,
        "trap_time": result.trap_time,
        "steps_executed": result.steps_executed,
        "seed_used": result.seed_used,
        "partition": [[v + 1 for v in b] for b in result.final_partition.blocks],
        "stag_attachment_count": result.stag_attachment_count,
        "stag_visit_drop_time": result.stag_visit_drop_time,
    }
    with open(os.path.join(args.out, "result.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"simulate: {result.steps_executed} steps, trapped={result.trapped}")
    return 0


def _write_manifest(args, cells, summary_path) -> None:
    manifest = RunManifest(
        config_digest=config_digest(cells),
        config_text=format_config(cells),
        tool_version=__version__,
        master_seed=cells[0].master_seed,
        created_utc=datetime.now(timezone.utc).isoformat(),
        summary_path=os.path.basename(summary_path),
        summary_digest=file_digest(summary_path),
    )
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json() + "\n")


def _cmd_sweep(args) -> int:
    cells = _load_cells(args)
    os.makedirs(args.out, exist_ok=True)
    summary = run_sweep(cells, parallelism=args.threads, config_digest=config_digest(cells))
    summary_path = os.path.join(args.out, "summary.csv")
    emit_summary(summary, summary_path)
    _write_manifest(args, cells, summary_path)
    for cell in summary.cells:
        if cell.error:
            print(
                f"cell (N={cell.n_agents}, x={cell.discount}) failed: {cell.error}",
                file=sys.stderr,
            )
    print(f"sweep: {len(summary.cells)} cells -> {summary_path}")
    return 0


def _cmd_analyze(args) -> int:
    summary_path = os.path.join(args.out, "summary.csv")
    rows = read_summary(summary_path)
    keys = sorted({(row["game"], row["N"]) for row in rows})
    analysis: dict = {"scaling": {}, "attachment": {}}
    for game_name, n in keys:
        sel = [r for r in rows if r["game"] == game_name and r["N"] == n]
        eligible = [
            r
            for r in sel
            if r["trap_time_median"] is not None and 2 * r["trapped"] >= r["trials"]
        ]
        label = f"{game_name},N={n}"
        if len(eligible) >= 3:
            xs = [1.0 / r["x"] for r in eligible]
            ys = [math.log(r["trap_time_median"]) for r in eligible]
            xm = sum(xs) / len(xs)
            ym = sum(ys) / len(ys)
            sxx = sum((v - xm) ** 2 for v in xs)
            sxy = sum((a - xm) * (b - ym) for a, b in zip(xs, ys))
            syy = sum((v - ym) ** 2 for v in ys)
            slope = sxy / sxx
            analysis["scaling"][label] = {
                "points": sorted(zip(xs, ys)),
                "slope": slope,
                "intercept": ym - slope * xm,
                "correlation": 1.0 if syy == 0 else sxy / math.sqrt(sxx * syy),
            }
        else:
            analysis["scaling"][label] = None
        if game_name == Game.STAG_HUNT.value:
            analysis["attachment"][label] = [
                {
                    "x": r["x"],
                    "attach_count_mean": r["attach_count_mean"],
                    "visit_drop_median": r["visit_drop_median"],
                }
                for r in sel
            ]
    out_path = os.path.join(args.out, "analysis.json")
    with open(out_path, "w") as fh:
        json.dump(analysis, fh, indent=2)
    print(f"analyze: wrote {out_path}")
    return 0


def _cmd_replay(args) -> int:
    manifest_path = os.path.join(args.out, "manifest.json")
    with open(manifest_path) as fh:
        manifest = RunManifest.from_json(fh.read())
    cells = parse_config(manifest.config_text)
    if config_digest(cells) != manifest.config_digest:
        raise ReplayMismatch("manifest config digest does not match its config text")
    summary_path = os.path.join(args.out, manifest.summary_path)
    on_disk = file_digest(summary_path)
    if on_disk != manifest.summary_digest:
        raise ReplayMismatch(
            f"summary file digest {on_disk[:12]}... differs from manifest "
            f"{manifest.summary_digest[:12]}..."
        )
    summary = run_sweep(cells, parallelism=args.threads, config_digest=manifest.config_digest)
    with tempfile.TemporaryDirectory() as tmp:
        fresh = os.path.join(tmp, "summary.csv")
        emit_summary(summary, fresh)
        recomputed = file_digest(fresh)
    if recomputed != manifest.summary_digest:
        raise ReplayMismatch(
            f"recomputed summary digest {recomputed[:12]}... differs from manifest "
            f"{manifest.summary_digest[:12]}..."
        )
    print("replay: digests verified")
    return 0


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "analyze": _cmd_analyze,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - uniform runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
