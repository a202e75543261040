"""Watch one population lock into cliques.

Runs a single trio-game trial at a steep discount, prints the trap report,
and shows the final propensity structure.  At x = 0.5 the six agents nearly
always split into two triangles within a few tens of thousands of steps.
"""

import numpy as np

from trionet import ModelConfig, TrialConfig, run_trial

config = TrialConfig(
    model=ModelConfig(n_agents=6, discount=0.5),
    horizon=500_000,
    master_seed=2026,
    trial_index=0,
)
result = run_trial(config)

print(f"trapped:        {result.trapped}")
print(f"trap time:      {result.trap_time}")
print(f"steps executed: {result.steps_executed}")
print(f"partition:      {[list(b) for b in result.final_partition.blocks]}")
print(f"max cross-choice probability: {result.trap_report.max_cross_probability:.3g}")
print()
print("final propensities (rounded):")
print(np.round(result.final_weights.entries, 2))
