"""Trap fraction versus discount: the medium-run cliff.

A small sweep over x for the six-agent trio game.  Steep discounting traps
essentially always within the horizon; at x = 0.3 the population usually
stays connected for the entire million steps.  Increase trials for smoother
fractions (the reference experiments used 1000 per cell).
"""

from trionet import ModelConfig, SweepCell, run_sweep
from trionet.io import emit_summary

cells = [
    SweepCell(
        model=ModelConfig(n_agents=6, discount=x),
        horizon=200_000,
        trials=40,
        master_seed=7,
    )
    for x in (0.5, 0.45, 0.4, 0.35, 0.3)
]

summary = run_sweep(cells)
print(f"{'x':>6} {'trapped':>8} {'fraction':>9} {'median trap time':>17}")
for cell in summary.cells:
    med = f"{cell.trap_time_median:.0f}" if cell.trap_time_median else "-"
    print(
        f"{cell.discount:>6} {cell.trapped_count:>8} "
        f"{cell.trapped_count / cell.trials:>9.3f} {med:>17}"
    )

emit_summary(summary, "trap_fractions.csv")
print("\nwrote trap_fractions.csv")
