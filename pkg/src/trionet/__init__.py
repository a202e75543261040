"""Monte Carlo toolkit for reinforcement-driven trio network formation.

Simulates populations whose members repeatedly pick trios under a
multiplicative propensity response with geometric discounting of the past,
detects the absorbing clique structure the dynamics settle into, and runs
seeded parameter sweeps that reproduce the medium-run statistics of the
Three's Company and three-player Stag Hunt models.
"""

from .dynamics import (
    Game,
    TrioWeightRule,
    ModelConfig,
    PropensityMatrix,
    TrioChoice,
    StepRecord,
    TrioDistribution,
    DegenerateDistributionError,
    init_weights,
    trio_distribution,
    sample_trios,
    reinforce_threes_company,
    reinforce_stag_hunt,
    step,
    cross_group_choice_probability,
    closed_form_total_weight,
)
from .graphs import (
    InteractionGraph,
    Partition,
    TrapCriterion,
    TrapReport,
    StagOutcome,
    BlockLabel,
    interaction_graph,
    transitive_closure,
    window_union,
    components,
    detect_trap,
    evaluate_trap,
    classify_stag_outcome,
)
from .experiments import (
    TrialConfig,
    TrialResult,
    SweepCell,
    CellSummary,
    SweepSummary,
    ScalingFit,
    derive_trial_seed,
    run_trial,
    run_sweep,
    estimate_scaling,
)

__version__ = "0.1.0"
