"""Figure builders: trap fraction vs x, trap-time scaling, visit-drop curve."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
from scipy import stats  # noqa: E402

SUMMARY_HEADER = (
    "game,N,x,trials,trapped,trap_frac,trap_time_median,trap_time_q10,"
    "trap_time_q90,attach_count_mean,visit_drop_median,seed"
)

KINDS = ("trap_fraction", "scaling", "visit_survival")


class SchemaError(ValueError):
    """The input file does not match the sweep summary contract."""


@dataclass(frozen=True)
class FigureRequest:
    input_csv: str
    kind: str
    output_image: str
    sidecar_path: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


def read_summary(path: str) -> list[dict]:
    """Parse a summary CSV, validating the exact column contract."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SUMMARY_HEADER:
        raise SchemaError(f"{path}: header does not match the summary contract")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 12:
            raise SchemaError(f"{path}:{line_no}: expected 12 columns, got {len(parts)}")
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
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _groups(rows: list[dict]) -> list[tuple[str, int]]:
    return sorted({(r["game"], r["N"]) for r in rows})


def _label(game: str, n: int) -> str:
    return f"{game},N={n}"


def binomial_interval(trapped: int, trials: int) -> tuple[float, float]:
    """Exact (Clopper-Pearson) central 95% interval for a binomial fraction."""
    low = float(stats.beta.ppf(0.025, trapped, trials - trapped + 1)) if trapped > 0 else 0.0
    high = (
        float(stats.beta.ppf(0.975, trapped + 1, trials - trapped))
        if trapped < trials
        else 1.0
    )
    return low, high


def _write_sidecar(path: str, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def plot_trap_fraction(request: FigureRequest) -> dict:
    """One trap-fraction-vs-x curve per (game, N), with exact 95% intervals."""
    rows = read_summary(request.input_csv)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    payload: dict = {"kind": "trap_fraction", "groups": {}}
    for game, n in _groups(rows):
        sel = sorted(
            (r for r in rows if r["game"] == game and r["N"] == n),
            key=lambda r: -r["x"],
        )
        points = []
        for r in sel:
            low, high = binomial_interval(r["trapped"], r["trials"])
            points.append(
                {
                    "x": r["x"],
                    "fraction": r["trap_frac"],
                    "low": low,
                    "high": high,
                    "trials": r["trials"],
                    "trapped": r["trapped"],
                }
            )
        payload["groups"][_label(game, n)] = points
        xs = [p["x"] for p in points]
        fr = [p["fraction"] for p in points]
        err_low = [p["fraction"] - p["low"] for p in points]
        err_high = [p["high"] - p["fraction"] for p in points]
        ax.errorbar(
            xs, fr, yerr=[err_low, err_high], marker="o", capsize=3,
            label=_label(game, n),
        )
    ax.set_xlabel("discount x")
    ax.set_ylabel("fraction of trials trapped")
    ax.set_ylim(-0.03, 1.03)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(request.output_image)
    plt.close(fig)
    _write_sidecar(request.sidecar_path, payload)
    return payload


def _scaling_points(rows: list[dict]) -> list[dict]:
    usable = [
        r
        for r in rows
        if r["trap_time_median"] is not None and 2 * r["trapped"] >= r["trials"]
    ]
    return sorted(usable, key=lambda r: 1.0 / r["x"])


def _least_squares(xs: list[float], ys: list[float]) -> tuple[float, float, float]:
    xm = sum(xs) / len(xs)
    ym = sum(ys) / len(ys)
    sxx = sum((v - xm) ** 2 for v in xs)
    sxy = sum((a - xm) * (b - ym) for a, b in zip(xs, ys))
    syy = sum((v - ym) ** 2 for v in ys)
    slope = sxy / sxx
    intercept = ym - slope * xm
    correlation = 1.0 if syy == 0.0 else sxy / math.sqrt(sxx * syy)
    return slope, intercept, correlation


def plot_scaling(request: FigureRequest) -> dict:
    """Log median trap time vs 1/x with the least-squares line per (game, N).

    Needs at least three cells where a majority of trials trapped; raises
    ValueError (and writes nothing) otherwise.
    """
    rows = read_summary(request.input_csv)
    prepared = {}
    for game, n in _groups(rows):
        sel = [r for r in rows if r["game"] == game and r["N"] == n]
        usable = _scaling_points(sel)
        if len(usable) >= 3:
            prepared[(game, n)] = usable
    if not prepared:
        raise ValueError("scaling figure needs at least 3 cells with a trapped majority")

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    payload: dict = {"kind": "scaling", "groups": {}}
    for (game, n), usable in prepared.items():
        inv_x = [1.0 / r["x"] for r in usable]
        log_median = [math.log(r["trap_time_median"]) for r in usable]
        slope, intercept, correlation = _least_squares(inv_x, log_median)
        payload["groups"][_label(game, n)] = {
            "points": [
                {"inv_x": a, "log_median": b, "fitted": intercept + slope * a}
                for a, b in zip(inv_x, log_median)
            ],
            "slope": slope,
            "intercept": intercept,
            "correlation": correlation,
        }
        ax.scatter(inv_x, log_median, label=_label(game, n))
        grid = sorted(inv_x)
        ax.plot(grid, [intercept + slope * g for g in grid], linestyle="--")
        ax.annotate(
            f"slope {slope:.2f}",
            xy=(grid[-1], intercept + slope * grid[-1]),
            xytext=(-40, 8),
            textcoords="offset points",
        )
    ax.set_xlabel("1 / x")
    ax.set_ylabel("log median trap time")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(request.output_image)
    plt.close(fig)
    _write_sidecar(request.sidecar_path, payload)
    return payload


def plot_visit_survival(request: FigureRequest) -> dict:
    """Median stag visit-drop time vs x (the summary-level coordination view).

    The summary contract carries only the per-cell median drop time, so this
    renders the median curve rather than a full survival function.
    """
    rows = read_summary(request.input_csv)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    payload: dict = {"kind": "visit_survival", "groups": {}}
    plotted = False
    for game, n in _groups(rows):
        sel = sorted(
            (
                r
                for r in rows
                if r["game"] == game and r["N"] == n and r["visit_drop_median"] is not None
            ),
            key=lambda r: -r["x"],
        )
        if not sel:
            continue
        plotted = True
        points = [{"x": r["x"], "visit_drop_median": r["visit_drop_median"]} for r in sel]
        payload["groups"][_label(game, n)] = points
        ax.plot(
            [p["x"] for p in points],
            [p["visit_drop_median"] for p in points],
            marker="s",
            label=_label(game, n),
        )
    if not plotted:
        raise ValueError("no rows carry a visit-drop median")
    ax.set_xlabel("discount x")
    ax.set_ylabel("median visit-drop time (steps)")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(request.output_image)
    plt.close(fig)
    _write_sidecar(request.sidecar_path, payload)
    return payload


def render(request: FigureRequest) -> dict:
    return {
        "trap_fraction": plot_trap_fraction,
        "scaling": plot_scaling,
        "visit_survival": plot_visit_survival,
    }[request.kind](request)
