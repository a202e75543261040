"""Seeded trials, parameter sweeps, and trapping-time statistics.

A trial advances one population until its trap criterion fires or a horizon
is exhausted.  Trials are deterministic functions of (master seed, trial
index, configuration): the random stream comes from a PCG64 generator seeded
through SplitMix64 mixing, and is consumed in a fixed order regardless of
chunking or worker count.

Long runs execute through the compiled kernels; runs that record trajectories
take the pure NumPy path instead.  Both paths consume the identical uniform
stream and produce bitwise-identical results.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from ._tables import all_stag_flags, trio_tables
from .dynamics import (
    DegenerateDistributionError,
    Game,
    ModelConfig,
    PropensityMatrix,
    TrioWeightRule,
    init_weights,
)
from .dynamics import step as dynamics_step
from .graphs import (
    Partition,
    TrapCriterion,
    TrapReport,
    classify_stag_outcome,
    evaluate_trap,
    graph_from_matrix,
    interaction_graph,
    transitive_closure,
    window_union,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_RULE_CODES = {
    TrioWeightRule.LITERAL: _kernels.RULE_LITERAL,
    TrioWeightRule.SYMMETRIZED: _kernels.RULE_SYMMETRIZED,
    TrioWeightRule.CHOOSER_ONLY: _kernels.RULE_CHOOSER_ONLY,
    TrioWeightRule.SEQUENTIAL: _kernels.RULE_SEQUENTIAL,
}


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """SplitMix64 mix of master seed and trial index.

    The pre-mix state master_seed + (index+1) * GOLDEN is injective in the
    index (the golden-ratio constant is odd), and the mixing function is a
    bijection on 64-bit words, so distinct indices always yield distinct
    seeds under one master seed.
    """
    z = (master_seed + (trial_index + 1) * _GOLDEN) & _MASK64
    return _mix64(z)


def cell_seed(master_seed: int, game: Game, n_agents: int, discount: float) -> int:
    """Per-cell master seed, independent of grid composition and ordering."""
    z = master_seed & _MASK64
    game_code = 1 if game is Game.THREES_COMPANY else 2
    x_bits = int(np.float64(discount).view(np.uint64))
    for v in (game_code, n_agents, x_bits):
        z = _mix64((z + (v + 1) * _GOLDEN) & _MASK64)
    return z


@dataclass(frozen=True)
class TrialConfig:
    model: ModelConfig
    horizon: int
    trap_criterion: TrapCriterion = TrapCriterion()
    check_interval: int = 1000
    master_seed: int = 0
    trial_index: int = 0
    record_trajectory: bool = False

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 1 <= self.check_interval <= self.horizon:
            raise ValueError(
                f"check_interval must lie in [1, horizon], got {self.check_interval}"
            )
        if self.trap_criterion.window % self.check_interval != 0:
            raise ValueError(
                "trap window must be a multiple of check_interval "
                f"(window={self.trap_criterion.window}, interval={self.check_interval})"
            )


@dataclass
class TrialResult:
    trapped: bool
    trap_time: int | None
    final_partition: Partition
    stag_attachment_count: int | None
    stag_visit_drop_time: int | None
    steps_executed: int
    seed_used: int
    final_weights: PropensityMatrix
    trap_report: TrapReport | None


def hare_visit_share(w: np.ndarray, stag: int, n_hare: int) -> float:
    """Share of a stag hunter's propensity row sitting on hare hunters.

    This is the probability that a single propensity-proportional draw picks
    a hare hunter, the monitored "visits a hare hunter" quantity.
    """
    row = w[stag]
    total = float(np.cumsum(row)[-1])
    hare_mass = float(np.cumsum(row[:n_hare])[-1]) if n_hare else 0.0
    if not total > 0.0:
        raise DegenerateDistributionError(f"agent {stag} has an all-zero propensity row")
    return hare_mass / total


def _stags_all_internal(w: np.ndarray, n_hare: int, eps: float) -> bool:
    """NumPy mirror of the kernel's per-step stag visit check (same floats)."""
    n = w.shape[0]
    for i in range(n_hare, n):
        row = w[i]
        total = float(np.cumsum(row)[-1])
        hare_mass = float(np.cumsum(row[:n_hare])[-1])
        if not total > 0.0:
            raise DegenerateDistributionError(f"agent {i} has an all-zero propensity row")
        if not hare_mass < eps * total:
            return False
    return True


def _classify_attachments(
    partition: Partition, w: PropensityMatrix, model: ModelConfig
) -> int | None:
    if model.game is not Game.STAG_HUNT:
        return None
    outcome = classify_stag_outcome(partition, w, model.n_hare, model.rule)
    return outcome.attached_count


def _is_trial_trap(report: TrapReport, game: Game) -> bool:
    """A trial counts as trapped only when the partition could be terminal.

    For Three's Company that additionally requires every block size to be an
    admissible clique size: a finite window can isolate a residual block of
    six or more agents that is still internally mixing and will split later,
    so such detections keep the trial running.
    """
    if not report.trapped:
        return False
    if game is Game.THREES_COMPANY:
        return bool(report.sizes_allowed)
    return True


def run_trial(
    config: TrialConfig,
    *,
    early_stop: bool = True,
    trajectory_sink: Callable[[dict], None] | None = None,
    trajectory_every: int = 100,
    report_sink: Callable[[TrapReport], None] | None = None,
) -> TrialResult:
    """Run one seeded trial to its horizon or first terminal trap.

    ``report_sink`` receives the TrapReport of every trap check performed;
    ``trajectory_sink`` receives checkpoint dicts (slow path only, enabled by
    ``config.record_trajectory``).
    """
    if config.record_trajectory:
        return _run_trial_reference(
            config, early_stop, trajectory_sink, trajectory_every, report_sink
        )
    return _run_trial_fast(config, early_stop, report_sink)


def _run_trial_fast(
    config: TrialConfig,
    early_stop: bool,
    report_sink: Callable[[TrapReport], None] | None,
) -> TrialResult:
    model = config.model
    n = model.n_agents
    criterion = config.trap_criterion
    rule_code = _RULE_CODES[model.rule]
    tables = trio_tables(n)
    seed = derive_trial_seed(config.master_seed, config.trial_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    w = init_weights(model).entries
    is_stag = model.game is Game.STAG_HUNT
    if is_stag:
        n_hare = model.n_hare
        stag_flags = all_stag_flags(n, n_hare)
    chunk = config.check_interval
    chunks_per_window = criterion.window // chunk
    unions: deque[np.ndarray] = deque(maxlen=chunks_per_window)

    t = 0
    visit_drop: int | None = None
    trapped = False
    trap_time: int | None = None
    last_report: TrapReport | None = None

    while t < config.horizon:
        k = min(chunk, config.horizon - t)
        uniforms = rng.random((k, n))
        union = np.zeros((n, n), dtype=np.bool_)
        choices = np.empty((k, n), dtype=np.int64)
        if is_stag:
            err, drop = _kernels.run_chunk_stag(
                w,
                uniforms,
                model.discount,
                model.hare_reward,
                model.stag_reward,
                n_hare,
                criterion.epsilon,
                visit_drop is None,
                tables.trios,
                tables.pair_rows,
                tables.pair_cols,
                tables.cand,
                tables.cand_others,
                stag_flags,
                rule_code,
                union,
                choices,
            )
            if visit_drop is None and drop >= 0:
                visit_drop = t + int(drop)
        else:
            err = _kernels.run_chunk_threes(
                w,
                uniforms,
                model.discount,
                model.trio_reward,
                tables.trios,
                tables.pair_rows,
                tables.pair_cols,
                tables.cand,
                tables.cand_others,
                rule_code,
                union,
                choices,
            )
        if err != _kernels.ERR_OK:
            raise DegenerateDistributionError(
                f"degenerate distribution encountered near step {t}"
            )
        t += k
        unions.append(union)

        if t >= criterion.window and t % chunk == 0 and len(unions) == chunks_per_window:
            mask = unions[0].copy()
            for other in list(unions)[1:]:
                mask |= other
            current = PropensityMatrix(w.copy(), time=t)
            report = evaluate_trap(
                graph_from_matrix(mask), current, criterion, model.game, model.rule
            ).at_time(t)
            last_report = report
            if report_sink is not None:
                report_sink(report)
            if not trapped and _is_trial_trap(report, model.game):
                trapped = True
                trap_time = t
                if early_stop:
                    break

    return _finish_trial(
        config, w, t, trapped, trap_time, visit_drop, last_report, unions, seed
    )


def _run_trial_reference(
    config: TrialConfig,
    early_stop: bool,
    trajectory_sink: Callable[[dict], None] | None,
    trajectory_every: int,
    report_sink: Callable[[TrapReport], None] | None,
) -> TrialResult:
    model = config.model
    criterion = config.trap_criterion
    seed = derive_trial_seed(config.master_seed, config.trial_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    w = init_weights(model)
    is_stag = model.game is Game.STAG_HUNT
    window_graphs: deque = deque(maxlen=criterion.window)

    visit_drop: int | None = None
    trapped = False
    trap_time: int | None = None
    last_report: TrapReport | None = None

    while w.time < config.horizon:
        if is_stag and visit_drop is None:
            if _stags_all_internal(w.entries, model.n_hare, criterion.epsilon):
                visit_drop = w.time
        w, record = dynamics_step(model, w, rng)
        window_graphs.append(interaction_graph(record))
        t = w.time

        if trajectory_sink is not None and t % trajectory_every == 0:
            union = window_union(list(window_graphs))
            report = evaluate_trap(union, w, criterion, model.game, model.rule)
            trajectory_sink(
                {
                    "t": t,
                    "choices": record.member_array().tolist(),
                    "total_weight": w.total_edge_weight(),
                    "cross_prob_max": report.max_cross_probability,
                    "partition": [list(b) for b in report.partition.blocks],
                }
            )

        if t >= criterion.window and t % config.check_interval == 0:
            union = window_union(list(window_graphs))
            report = evaluate_trap(union, w, criterion, model.game, model.rule).at_time(t)
            last_report = report
            if report_sink is not None:
                report_sink(report)
            if not trapped and _is_trial_trap(report, model.game):
                trapped = True
                trap_time = t
                if early_stop:
                    break

    graphs = list(window_graphs)
    union_masks: deque[np.ndarray] = deque()
    if graphs:
        mask = np.zeros((model.n_agents, model.n_agents), dtype=np.bool_)
        for g in graphs:
            for a, b in g.edges:
                mask[a, b] = True
        union_masks.append(mask)
    return _finish_trial(
        config, w.entries, w.time, trapped, trap_time, visit_drop, last_report,
        union_masks, seed,
    )


def _finish_trial(
    config: TrialConfig,
    w: np.ndarray,
    steps: int,
    trapped: bool,
    trap_time: int | None,
    visit_drop: int | None,
    last_report: TrapReport | None,
    unions: Iterable[np.ndarray],
    seed: int,
) -> TrialResult:
    model = config.model
    final_w = PropensityMatrix(w.copy(), time=steps)
    if last_report is not None:
        partition = last_report.partition
    else:
        masks = list(unions)
        if masks:
            mask = masks[0].copy()
            for other in masks[1:]:
                mask |= other
        else:
            mask = np.zeros((model.n_agents, model.n_agents), dtype=np.bool_)
        _, partition = transitive_closure(graph_from_matrix(mask))
    return TrialResult(
        trapped=trapped,
        trap_time=trap_time,
        final_partition=partition,
        stag_attachment_count=_classify_attachments(partition, final_w, model),
        stag_visit_drop_time=visit_drop,
        steps_executed=steps,
        seed_used=seed,
        final_weights=final_w,
        trap_report=last_report,
    )


@dataclass(frozen=True)
class SweepCell:
    """One grid cell: a model plus trial count and stopping configuration."""

    model: ModelConfig
    horizon: int
    trials: int
    trap_criterion: TrapCriterion = TrapCriterion()
    check_interval: int = 1000
    master_seed: int = 0

    def trial_config(self, trial_index: int) -> TrialConfig:
        seed = cell_seed(
            self.master_seed, self.model.game, self.model.n_agents, self.model.discount
        )
        return TrialConfig(
            model=self.model,
            horizon=self.horizon,
            trap_criterion=self.trap_criterion,
            check_interval=self.check_interval,
            master_seed=seed,
            trial_index=trial_index,
        )


@dataclass
class CellSummary:
    game: Game
    n_agents: int
    discount: float
    trials: int
    trapped_count: int
    trap_time_median: float | None
    trap_time_q10: float | None
    trap_time_q90: float | None
    attach_count_mean: float | None
    attach_any_count: int | None
    visit_drop_median: float | None
    master_seed: int
    error: str | None = None


@dataclass
class SweepSummary:
    cells: list[CellSummary]
    master_seed: int
    config_digest: str = ""


def _summarize_cell(cell: SweepCell, results: Sequence[TrialResult]) -> CellSummary:
    trapped_times = np.array(
        [r.trap_time for r in results if r.trapped], dtype=np.float64
    )
    trapped_count = trapped_times.size
    if trapped_count:
        median, q10, q90 = (
            float(v) for v in np.quantile(trapped_times, [0.5, 0.1, 0.9])
        )
    else:
        median = q10 = q90 = None
    attach_mean = attach_any = visit_median = None
    if cell.model.game is Game.STAG_HUNT:
        counts = np.array([r.stag_attachment_count for r in results], dtype=np.float64)
        attach_mean = float(counts.mean())
        attach_any = int((counts > 0).sum())
        drops = [
            r.stag_visit_drop_time
            for r in results
            if r.stag_visit_drop_time is not None
        ]
        visit_median = float(np.median(drops)) if drops else None
    return CellSummary(
        game=cell.model.game,
        n_agents=cell.model.n_agents,
        discount=cell.model.discount,
        trials=cell.trials,
        trapped_count=int(trapped_count),
        trap_time_median=median,
        trap_time_q10=q10,
        trap_time_q90=q90,
        attach_count_mean=attach_mean,
        attach_any_count=attach_any,
        visit_drop_median=visit_median,
        master_seed=cell.master_seed,
    )


def _error_summary(cell: SweepCell, message: str) -> CellSummary:
    return CellSummary(
        game=cell.model.game,
        n_agents=cell.model.n_agents,
        discount=cell.model.discount,
        trials=cell.trials,
        trapped_count=0,
        trap_time_median=None,
        trap_time_q10=None,
        trap_time_q90=None,
        attach_count_mean=None,
        attach_any_count=None,
        visit_drop_median=None,
        master_seed=cell.master_seed,
        error=message,
    )


def run_sweep(
    cells: Sequence[SweepCell],
    parallelism: int = 1,
    config_digest: str = "",
) -> SweepSummary:
    """Run every trial of every cell and aggregate per-cell statistics.

    Trials are independent work units; results are reduced in (cell, trial)
    index order, so the outcome never depends on worker count or scheduling.
    A failing trial marks its cell as errored without aborting the sweep.
    """
    if not cells:
        raise ValueError("sweep grid is empty")
    tasks = [
        (ci, k, cell.trial_config(k))
        for ci, cell in enumerate(cells)
        for k in range(cell.trials)
    ]

    def work(task):
        ci, k, cfg = task
        try:
            return ci, k, run_trial(cfg), None
        except Exception as exc:  # noqa: BLE001 - per-cell error isolation
            return ci, k, None, f"trial {k}: {exc}"

    results: dict[int, dict[int, TrialResult]] = {ci: {} for ci in range(len(cells))}
    errors: dict[int, str] = {}
    if parallelism <= 1:
        outcomes = map(work, tasks)
    else:
        pool = ThreadPoolExecutor(max_workers=parallelism)
        try:
            outcomes = list(pool.map(work, tasks))
        finally:
            pool.shutdown()
    for ci, k, res, err in outcomes:
        if err is not None:
            errors.setdefault(ci, err)
        else:
            results[ci][k] = res

    summaries = []
    for ci, cell in enumerate(cells):
        if ci in errors:
            summaries.append(_error_summary(cell, errors[ci]))
        else:
            ordered = [results[ci][k] for k in range(cell.trials)]
            summaries.append(_summarize_cell(cell, ordered))
    summaries.sort(key=lambda c: (c.game.value, c.n_agents, -c.discount))
    master = cells[0].master_seed
    return SweepSummary(cells=summaries, master_seed=master, config_digest=config_digest)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (1/x, log median trap time)."""

    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    correlation: float


def estimate_scaling(summary: SweepSummary, game: Game, n_agents: int) -> ScalingFit:
    """Fit the trap-time growth exponent over cells where a majority trapped."""
    eligible = [
        c
        for c in summary.cells
        if c.game is game
        and c.n_agents == n_agents
        and c.error is None
        and c.trap_time_median is not None
        and 2 * c.trapped_count >= c.trials
    ]
    if len(eligible) < 3:
        raise ValueError(
            f"scaling fit needs at least 3 cells with a trapped majority, got {len(eligible)}"
        )
    xs = np.array([1.0 / c.discount for c in eligible])
    ys = np.array([np.log(c.trap_time_median) for c in eligible])
    xm, ym = xs.mean(), ys.mean()
    sxx = float(((xs - xm) ** 2).sum())
    sxy = float(((xs - xm) * (ys - ym)).sum())
    syy = float(((ys - ym) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("scaling fit needs at least two distinct discount values")
    slope = sxy / sxx
    intercept = ym - slope * xm
    if syy == 0.0:
        correlation = 1.0  # constant medians: the flat line fits exactly
    else:
        correlation = sxy / np.sqrt(sxx * syy)
    return ScalingFit(
        points=tuple(zip(xs.tolist(), ys.tolist())),
        slope=float(slope),
        intercept=float(intercept),
        correlation=float(correlation),
    )
