"""Stag Hunt: fast stag coordination, occasional hare-side traps.

Six stag hunters decouple from the hare hunters within a few dozen rounds
(their probability of visiting a hare collapses), while hare hunters either
consolidate among themselves or get stuck perpetually calling on stags.
Prints the visit-drop time and the attachment outcome for a handful of
trials, then the attachment fraction across a small sweep.
"""

from trionet import Game, ModelConfig, SweepCell, TrialConfig, run_sweep, run_trial

model = ModelConfig(n_agents=12, discount=0.5, game=Game.STAG_HUNT)

print("single trials:")
for k in range(5):
    result = run_trial(TrialConfig(model=model, horizon=10_000, master_seed=31, trial_index=k))
    print(
        f"  trial {k}: visit-drop at t={result.stag_visit_drop_time}, "
        f"attached hares: {result.stag_attachment_count}, "
        f"blocks {[list(b) for b in result.final_partition.blocks]}"
    )

cells = [
    SweepCell(model=ModelConfig(12, x, game=Game.STAG_HUNT), horizon=10_000, trials=60, master_seed=5)
    for x in (0.5, 0.3, 0.1)
]
summary = run_sweep(cells)
print("\nattachment fraction by discount:")
for cell in summary.cells:
    print(
        f"  x={cell.discount}: {cell.attach_any_count}/{cell.trials} trials with an attached hare, "
        f"median visit-drop {cell.visit_drop_median:.0f}"
    )
