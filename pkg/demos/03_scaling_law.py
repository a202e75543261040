"""Trapping-time growth as the discount shrinks.

Fits a least-squares line through (1/x, log median trap time).  The positive
slope is the empirical growth exponent of the meta-stable connected phase,
which lengthens exponentially in 1/x.
"""

from trionet import Game, ModelConfig, SweepCell, estimate_scaling, run_sweep

cells = [
    SweepCell(
        model=ModelConfig(n_agents=6, discount=x),
        horizon=1_000_000,
        trials=60,
        master_seed=99,
    )
    for x in (0.5, 0.45, 0.4)
]

summary = run_sweep(cells)
for cell in summary.cells:
    print(f"x={cell.discount}: median trap time {cell.trap_time_median:.0f} "
          f"({cell.trapped_count}/{cell.trials} trapped)")

fit = estimate_scaling(summary, Game.THREES_COMPANY, 6)
print(f"\nlog t_trap ~ {fit.slope:.2f} / x + {fit.intercept:.2f}   (r = {fit.correlation:.4f})")
