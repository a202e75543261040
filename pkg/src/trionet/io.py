"""Config parsing, result serialization, and run manifests.

The config grammar is a flat key = value file with '#' comments.  Keys:

    game            threes_company | stag_hunt
    n               population size (stag_hunt needs an even value)
    x               one discount value or a comma-separated list in (0, 1)
    horizon         steps per trial
    trials          trials per grid cell
    seed            64-bit master seed
    epsilon         trap threshold on cross-block choice probability
    window          trap window length in steps
    check_interval  steps between trap checks (must divide window)
    rule            sequential | literal | symmetrized | chooser_only

The grid is one cell per x value.  Serialized agent ids are 1-based in every
output file; the Python API is 0-based throughout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .dynamics import Game, ModelConfig, TrioWeightRule
from .experiments import SweepCell, SweepSummary
from .graphs import TrapCriterion, TrapReport, graph_from_matrix, transitive_closure

SUMMARY_HEADER = (
    "game,N,x,trials,trapped,trap_frac,trap_time_median,trap_time_q10,"
    "trap_time_q90,attach_count_mean,visit_drop_median,seed"
)

_GAMES = {g.value: g for g in Game}
_RULES = {r.value: r for r in TrioWeightRule}
_KEYS = (
    "game",
    "n",
    "x",
    "horizon",
    "trials",
    "seed",
    "epsilon",
    "window",
    "check_interval",
    "rule",
)


class ConfigError(ValueError):
    """Raised for malformed config text; messages carry the offending line."""


def _fail(line_no: int, message: str) -> None:
    raise ConfigError(f"line {line_no}: {message}")


def parse_config(text: str) -> list[SweepCell]:
    """Parse config text into a grid of sweep cells, one per x value."""
    raw: dict[str, tuple[int, str]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            _fail(line_no, f"expected 'key = value', got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            _fail(line_no, f"unknown key {key!r}")
        if key in raw:
            _fail(line_no, f"duplicate key {key!r}")
        if not value:
            _fail(line_no, f"key {key!r} has no value")
        raw[key] = (line_no, value)

    def take(key: str, default: str | None = None) -> tuple[int, str]:
        if key in raw:
            return raw[key]
        if default is None:
            raise ConfigError(f"line 0: missing required key {key!r}")
        return (0, default)

    def parse_int(key: str, default: str | None = None, minimum: int = 1) -> int:
        line_no, value = take(key, default)
        try:
            parsed = int(value)
        except ValueError:
            _fail(line_no, f"{key} must be an integer, got {value!r}")
        if parsed < minimum:
            _fail(line_no, f"{key} must be >= {minimum}, got {parsed}")
        return parsed

    line_no, value = take("game", "threes_company")
    game = _GAMES.get(value.lower())
    if game is None:
        _fail(line_no, f"game must be one of {sorted(_GAMES)}, got {value!r}")

    n = parse_int("n", minimum=4)
    if game is Game.STAG_HUNT and n % 2 != 0:
        _fail(take("n")[0], f"n must be even for stag_hunt, got {n}")

    line_no, value = take("x")
    xs: list[float] = []
    for tok in value.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            x = float(tok)
        except ValueError:
            _fail(line_no, f"x values must be numbers, got {tok!r}")
        if not 0.0 < x < 1.0:
            _fail(line_no, f"x must lie in the open interval (0, 1), got {tok}")
        xs.append(x)
    if not xs:
        _fail(line_no, "x needs at least one value")
    if len(set(xs)) != len(xs):
        _fail(line_no, "x values must be distinct")

    horizon = parse_int("horizon")
    trials = parse_int("trials")
    seed = parse_int("seed", minimum=0)
    window = parse_int("window", "1000")
    check_interval = parse_int("check_interval", str(min(window, horizon)))

    line_no, value = take("epsilon", "0.005")
    try:
        epsilon = float(value)
    except ValueError:
        _fail(line_no, f"epsilon must be a number, got {value!r}")
    if not 0.0 < epsilon < 1.0:
        _fail(line_no, f"epsilon must lie in (0, 1), got {value}")

    line_no, value = take("rule", TrioWeightRule.SEQUENTIAL.value)
    rule = _RULES.get(value.lower())
    if rule is None:
        _fail(line_no, f"rule must be one of {sorted(_RULES)}, got {value!r}")

    if check_interval > horizon:
        _fail(take("check_interval", "")[0],
              f"check_interval {check_interval} exceeds horizon {horizon}")
    if window % check_interval != 0:
        _fail(take("window", "")[0],
              f"window {window} must be a multiple of check_interval {check_interval}")

    criterion = TrapCriterion(epsilon=epsilon, window=window)
    cells = []
    for x in sorted(xs, reverse=True):
        model = ModelConfig(n_agents=n, discount=x, game=game, rule=rule)
        cells.append(
            SweepCell(
                model=model,
                horizon=horizon,
                trials=trials,
                trap_criterion=criterion,
                check_interval=check_interval,
                master_seed=seed,
            )
        )
    return cells


def format_config(cells: Sequence[SweepCell]) -> str:
    """Canonical config text for a grid produced by parse_config.

    parse_config(format_config(cells)) reproduces the same cells.
    """
    if not cells:
        raise ValueError("empty grid")
    first = cells[0]
    xs = ", ".join(_fmt(c.model.discount) for c in cells)
    lines = [
        f"game = {first.model.game.value}",
        f"n = {first.model.n_agents}",
        f"x = {xs}",
        f"horizon = {first.horizon}",
        f"trials = {first.trials}",
        f"seed = {first.master_seed}",
        f"epsilon = {_fmt(first.trap_criterion.epsilon)}",
        f"window = {first.trap_criterion.window}",
        f"check_interval = {first.check_interval}",
        f"rule = {first.model.rule.value}",
    ]
    return "\n".join(lines) + "\n"


def config_digest(cells: Sequence[SweepCell]) -> str:
    """Platform-stable digest of the canonical config content."""
    return hashlib.sha256(format_config(cells).encode("utf-8")).hexdigest()


def _fmt(value: float) -> str:
    # 17 significant digits round-trip every float64 exactly
    return "%.17g" % value


def _fmt_opt(value: float | None) -> str:
    return "" if value is None else _fmt(value)


def summary_rows(summary: SweepSummary) -> list[str]:
    rows = []
    for cell in summary.cells:
        if cell.error is not None:
            continue
        rows.append(
            ",".join(
                (
                    cell.game.value,
                    str(cell.n_agents),
                    _fmt(cell.discount),
                    str(cell.trials),
                    str(cell.trapped_count),
                    _fmt(cell.trapped_count / cell.trials),
                    _fmt_opt(cell.trap_time_median),
                    _fmt_opt(cell.trap_time_q10),
                    _fmt_opt(cell.trap_time_q90),
                    _fmt_opt(cell.attach_count_mean),
                    _fmt_opt(cell.visit_drop_median),
                    str(summary.master_seed),
                )
            )
        )
    return rows


def emit_summary(summary: SweepSummary, path) -> None:
    """Write the per-cell summary CSV (schema-stable, byte-reproducible)."""
    lines = [SUMMARY_HEADER] + summary_rows(summary)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_summary(path) -> list[dict]:
    """Read a summary CSV back into one dict per row (numbers parsed)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SUMMARY_HEADER:
        raise ValueError(f"{path} does not carry the expected summary header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            {
                "game": parts[0],
                "N": int(parts[1]),
                "x": float(parts[2]),
                "trials": int(parts[3]),
                "trapped": int(parts[4]),
                "trap_frac": float(parts[5]),
                "trap_time_median": float(parts[6]) if parts[6] else None,
                "trap_time_q10": float(parts[7]) if parts[7] else None,
                "trap_time_q90": float(parts[8]) if parts[8] else None,
                "attach_count_mean": float(parts[9]) if parts[9] else None,
                "visit_drop_median": float(parts[10]) if parts[10] else None,
                "seed": int(parts[11]),
            }
        )
    return rows


class TrajectoryWriter:
    """Streams one JSON object per checkpoint to a JSONL file.

    Checkpoint fields: t, choices (N sorted triples), total_weight,
    cross_prob_max, partition.  Agent ids are serialized 1-based.
    """

    def __init__(self, fh: TextIO):
        self._fh = fh

    def write(self, point: dict) -> None:
        record = {
            "t": point["t"],
            "choices": [[v + 1 for v in trio] for trio in point["choices"]],
            "total_weight": point["total_weight"],
            "cross_prob_max": point["cross_prob_max"],
            "partition": [[v + 1 for v in block] for block in point["partition"]],
        }
        self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def emit_trajectory(points: Iterable[dict], path) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = TrajectoryWriter(fh)
        for point in points:
            writer.write(point)


def load_trajectory(path) -> list[dict]:
    """Read a trajectory JSONL back with 0-based agent ids."""
    points = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            points.append(
                {
                    "t": rec["t"],
                    "choices": [[v - 1 for v in trio] for trio in rec["choices"]],
                    "total_weight": rec["total_weight"],
                    "cross_prob_max": rec["cross_prob_max"],
                    "partition": [[v - 1 for v in block] for block in rec["partition"]],
                }
            )
    return points


def analyze_trajectory(
    points: Sequence[dict],
    n_agents: int,
    criterion: TrapCriterion,
    game: Game,
    check_interval: int | None = None,
) -> TrapReport:
    """Re-derive the trap report of a run from its per-step trajectory.

    Requires a cadence-1 trajectory: window unions are rebuilt from the
    recorded choices, and the recorded cross_prob_max stands in for the live
    weight computation.  Checks run on the live runner's schedule (every
    ``check_interval`` steps, defaulting to the window length), so the first
    trapping report (or the final report when nothing trapped) matches the
    live run's exactly.
    """
    if not points:
        raise ValueError("empty trajectory")
    if check_interval is None:
        check_interval = criterion.window
    masks: list[np.ndarray] = []
    last_report: TrapReport | None = None
    for point in points:
        mask = np.zeros((n_agents, n_agents), dtype=np.bool_)
        for trio in point["choices"]:
            a, b, c = sorted(trio)
            mask[a, b] = mask[a, c] = mask[b, c] = True
        masks.append(mask)
        t = point["t"]
        if t >= criterion.window and t % check_interval == 0 and len(masks) >= criterion.window:
            window = masks[-criterion.window:]
            union = window[0].copy()
            for other in window[1:]:
                union |= other
            _, partition = transitive_closure(graph_from_matrix(union))
            max_cross = float(point["cross_prob_max"])
            trapped = len(partition.blocks) >= 2 and max_cross < criterion.epsilon
            sizes = partition.sizes
            report = TrapReport(
                trapped=trapped,
                partition=partition,
                max_cross_probability=max_cross,
                sizes=sizes,
                detection_time=t,
                sizes_allowed=(
                    all(s in criterion.allowed_sizes for s in sizes)
                    if game is Game.THREES_COMPANY
                    else None
                ),
            )
            last_report = report
            if trapped and (game is Game.STAG_HUNT or report.sizes_allowed):
                return report
    if last_report is None:
        raise ValueError("trajectory is shorter than the trap window")
    return last_report


@dataclass(frozen=True)
class RunManifest:
    """Provenance of a sweep: enough to re-derive every output byte."""

    config_digest: str
    config_text: str
    tool_version: str
    master_seed: int
    created_utc: str
    summary_path: str
    summary_digest: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_digest": self.config_digest,
                "config_text": self.config_text,
                "tool_version": self.tool_version,
                "master_seed": self.master_seed,
                "created_utc": self.created_utc,
                "outputs": {
                    "summary_csv": {
                        "path": self.summary_path,
                        "sha256": self.summary_digest,
                    }
                },
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        out = data["outputs"]["summary_csv"]
        return cls(
            config_digest=data["config_digest"],
            config_text=data["config_text"],
            tool_version=data["tool_version"],
            master_seed=data["master_seed"],
            created_utc=data["created_utc"],
            summary_path=out["path"],
            summary_digest=out["sha256"],
        )


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
