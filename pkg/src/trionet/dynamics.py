"""Core state and dynamics: propensity weights, trio choice, reinforcement.

The population holds an N x N matrix W of pairwise propensities.  Every step,
each agent independently picks a trio (itself plus two others) with probability
proportional to a product of propensity factors over the trio, and the chosen
trios then reinforce W:

* Three's Company: every pair covered by a chosen trio gains +1 per covering
  trio, after the whole matrix decays by the survival factor (1 - x).
* Stag Hunt: agents 0..n-1 are hare hunters and n..N-1 are stag hunters.  A
  hare hunter's row gains +3 per covering trio; a stag hunter's row gains +4
  per covering trio that consists entirely of stag hunters.  Rows evolve
  independently, so W generally loses symmetry.

All agents are indexed 0..N-1 throughout the Python API; serialization to
files uses 1-based ids (see trionet.io).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._tables import all_stag_flags, trio_tables

# Narrative payoffs of the Stag Hunt: a hare is worth 3, a third of a stag 4.
# These are the increments used by the batch reinforcement operations.
HARE_REWARD = 3.0
STAG_REWARD = 4.0
TRIO_REWARD = 1.0

# Engine defaults.  Each row's dynamics depend only on the ratio of its
# reinforcement increment to its initial weight, and the medium-run
# statistics of the reference simulations (attachment fractions, trap
# fractions) reproduce with hare rows reinforced by success counts (+1 per
# collusion) rather than by the payoff value 3; stag rows need the full
# bounty 4 to reproduce the stag coordination speeds.
ENGINE_HARE_REWARD = 1.0
ENGINE_STAG_REWARD = 4.0

# Post-decay weights below this are flushed to exact zero: geometric decay
# would otherwise park entries on the smallest subnormal forever (it is a
# fixed point of multiplying by any survival factor above one half), and
# denormal arithmetic is catastrophically slow.  Anything this small is
# unreachable regardless.
WEIGHT_FLOOR = 1e-300


class Game(enum.Enum):
    THREES_COMPANY = "threes_company"
    STAG_HUNT = "stag_hunt"


class TrioWeightRule(enum.Enum):
    """How a trio's unnormalized choice weight is built from W.

    LITERAL      product of the three pair entries W[r, s] with r < s.
    SYMMETRIZED  same pairs, but each factor is (W[r, s] + W[s, r]) / 2.
    CHOOSER_ONLY product of the chooser's own two entries W[i, j] * W[i, k].
    SEQUENTIAL   the chooser draws two partners one after the other, each in
                 proportion to her own row, without replacement.  The induced
                 trio weight is W[i,j] W[i,k] (1/(T-W[i,j]) + 1/(T-W[i,k]))
                 with T the chooser's row total.

    Only the first two rules use propensities the chooser does not own; under
    CHOOSER_ONLY and SEQUENTIAL an agent's choices are never influenced by
    other agents' propensities, which is what lets stag hunters decouple from
    hare hunters.  SEQUENTIAL is the rule under which the simulated medium-run
    trapping statistics reproduce; see the experiment defaults.
    """

    LITERAL = "literal"
    SYMMETRIZED = "symmetrized"
    CHOOSER_ONLY = "chooser_only"
    SEQUENTIAL = "sequential"


class DegenerateDistributionError(RuntimeError):
    """Every candidate trio for a chooser has zero weight."""


@dataclass(frozen=True)
class ModelConfig:
    """Immutable parameters of one simulated population.

    ``discount`` is the forgetting rate x in (0, 1): past propensities are
    scaled by (1 - discount) each step before reinforcements are added.
    The reward fields are per-collusion reinforcement increments added to a
    member's row toward each of the other two members; reward constants are
    fixed for the lifetime of a run.
    """

    n_agents: int
    discount: float
    game: Game = Game.THREES_COMPANY
    rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL
    hare_reward: float = ENGINE_HARE_REWARD
    stag_reward: float = ENGINE_STAG_REWARD
    trio_reward: float = TRIO_REWARD

    def __post_init__(self) -> None:
        if self.n_agents < 4:
            raise ValueError(f"n_agents must be >= 4, got {self.n_agents}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if self.game is Game.STAG_HUNT and self.n_agents % 2 != 0:
            raise ValueError(
                f"Stag Hunt needs an even population, got {self.n_agents}"
            )

    @property
    def n_hare(self) -> int:
        """Number of hare hunters (agents 0..n_hare-1) in the Stag Hunt."""
        if self.game is not Game.STAG_HUNT:
            raise ValueError("n_hare is only defined for the Stag Hunt")
        return self.n_agents // 2


@dataclass
class PropensityMatrix:
    """Pairwise propensity weights at an integer time step.

    Invariants: square float64 array, zero diagonal, nonnegative entries.
    Symmetry holds under Three's Company dynamics but not in general.
    """

    entries: np.ndarray
    time: int = 0

    def __post_init__(self) -> None:
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n) or n < 4:
            raise ValueError(f"entries must be square with N >= 4, got {self.entries.shape}")
        if np.any(np.diagonal(self.entries) != 0.0):
            raise ValueError("diagonal entries must be exactly zero")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("propensities must be finite")
        if np.any(self.entries < 0.0):
            raise ValueError("propensities must be nonnegative")

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    def copy(self) -> "PropensityMatrix":
        return PropensityMatrix(self.entries.copy(), self.time)

    def total_edge_weight(self) -> float:
        """Sum of W over unordered pairs; for asymmetric W each pair counts
        the mean of its two orientations."""
        return float((self.entries.sum() / 2.0))


@dataclass(frozen=True)
class TrioChoice:
    """One agent's chosen trio: the chooser plus two distinct partners."""

    chooser: int
    members: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(set(self.members)) != 3 or self.chooser not in self.members:
            raise ValueError(f"invalid trio {self.members} for chooser {self.chooser}")


@dataclass(frozen=True)
class StepRecord:
    """All N trio choices of a single time step, indexed by chooser."""

    time: int
    choices: tuple[TrioChoice, ...]

    def __post_init__(self) -> None:
        for i, choice in enumerate(self.choices):
            if choice.chooser != i:
                raise ValueError(f"choice {i} has chooser {choice.chooser}")

    @property
    def n_agents(self) -> int:
        return len(self.choices)

    def member_array(self) -> np.ndarray:
        """Choices as an (N, 3) int array of sorted member ids."""
        return np.array([sorted(c.members) for c in self.choices], dtype=np.int64)


@dataclass(frozen=True)
class TrioDistribution:
    """Choice distribution of one agent: candidate trios and their probabilities."""

    chooser: int
    members: np.ndarray  # (M, 3) sorted rows, lexicographic order
    probs: np.ndarray    # (M,) nonnegative, sums to 1


def init_weights(config: ModelConfig) -> PropensityMatrix:
    """Uniform starting propensities: 1 off the diagonal, 0 on it, at time 0."""
    w = np.ones((config.n_agents, config.n_agents), dtype=np.float64)
    np.fill_diagonal(w, 0.0)
    return PropensityMatrix(w, time=0)


def _candidate_weights(
    w: np.ndarray, chooser: int, rule: TrioWeightRule
) -> np.ndarray:
    """Unnormalized weights over the candidate trios of ``chooser``.

    The multiplication order is fixed (first pair, second pair, third pair)
    so the compiled kernels can reproduce the exact same floats.
    """
    tables = trio_tables(w.shape[0])
    ids = tables.cand[chooser]
    if rule is TrioWeightRule.CHOOSER_ONLY:
        others = tables.cand_others[chooser]
        return w[chooser, others[:, 0]] * w[chooser, others[:, 1]]
    if rule is TrioWeightRule.SEQUENTIAL:
        row = w[chooser]
        total = np.cumsum(row)[-1]
        others = tables.cand_others[chooser]
        wj = row[others[:, 0]]
        wk = row[others[:, 1]]
        # rows with fewer than two positive partners yield NaN here, which the
        # callers report as a degenerate distribution
        with np.errstate(divide="ignore", invalid="ignore"):
            return (wj * wk) * (1.0 / (total - wj) + 1.0 / (total - wk))
    rows = tables.pair_rows[ids]
    cols = tables.pair_cols[ids]
    if rule is TrioWeightRule.SYMMETRIZED:
        factors = (w[rows, cols] + w[cols, rows]) * 0.5
    else:
        factors = w[rows, cols]
    return factors[:, 0] * factors[:, 1] * factors[:, 2]


def trio_distribution(
    w: PropensityMatrix, chooser: int, rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL
) -> TrioDistribution:
    """Normalized choice distribution of ``chooser`` over its C(N-1,2) trios."""
    n = w.n_agents
    if not 0 <= chooser < n:
        raise ValueError(f"chooser {chooser} out of range for N={n}")
    weights = _candidate_weights(w.entries, chooser, rule)
    total = float(np.cumsum(weights)[-1])
    if not total > 0.0 or not np.isfinite(total):
        # NaN totals arise under SEQUENTIAL when fewer than two partners have
        # positive weight, which is just as unsampleable as an all-zero table.
        raise DegenerateDistributionError(
            f"degenerate distribution: agent {chooser} cannot draw a trio"
        )
    tables = trio_tables(n)
    members = tables.trios[tables.cand[chooser]]
    return TrioDistribution(chooser=chooser, members=members, probs=weights / total)


def sample_trio_index(
    w: np.ndarray, chooser: int, rule: TrioWeightRule, u: float
) -> int:
    """Map a uniform draw to the global trio id chosen by ``chooser``.

    Inverse-CDF over the sequential cumulative sum of candidate weights; this
    is the single sampling primitive shared (operation for operation) with the
    compiled kernels.
    """
    tables = trio_tables(w.shape[0])
    weights = _candidate_weights(w, chooser, rule)
    cum = np.cumsum(weights)
    total = cum[-1]
    if not total > 0.0 or not np.isfinite(total):
        raise DegenerateDistributionError(
            f"degenerate distribution: agent {chooser} cannot draw a trio"
        )
    k = int(np.searchsorted(cum, u * total, side="right"))
    k = min(k, len(cum) - 1)
    return int(tables.cand[chooser, k])


def sample_trios(
    w: PropensityMatrix,
    rule: TrioWeightRule,
    rng: np.random.Generator,
) -> StepRecord:
    """Draw every agent's trio independently from its current distribution.

    Consumes exactly N uniforms, one per agent in id order.
    """
    n = w.n_agents
    tables = trio_tables(n)
    uniforms = rng.random(n)
    choices = []
    for i in range(n):
        tid = sample_trio_index(w.entries, i, rule, uniforms[i])
        members = tuple(int(v) for v in tables.trios[tid])
        choices.append(TrioChoice(chooser=i, members=members))
    return StepRecord(time=w.time, choices=tuple(choices))


def _coverage_counts(record: StepRecord, n: int) -> np.ndarray:
    """How many chosen trios cover each ordered pair (symmetric by construction)."""
    counts = np.zeros((n, n), dtype=np.float64)
    for choice in record.choices:
        a, b, c = sorted(choice.members)
        for r, s in ((a, b), (a, c), (b, c)):
            counts[r, s] += 1.0
            counts[s, r] += 1.0
    return counts


def reinforce_threes_company(
    w: PropensityMatrix,
    record: StepRecord,
    discount: float,
    trio_reward: float = TRIO_REWARD,
) -> PropensityMatrix:
    """One batch update W(t) -> W(t+1): decay everything, then add the reward
    once per covering trio, symmetrically."""
    if record.time != w.time:
        raise ValueError(f"choices at time {record.time} cannot update W at time {w.time}")
    counts = _coverage_counts(record, w.n_agents)
    out = (1.0 - discount) * w.entries + trio_reward * counts
    np.fill_diagonal(out, 0.0)
    return PropensityMatrix(out, time=w.time + 1)


def reinforce_stag_hunt(
    w: PropensityMatrix,
    record: StepRecord,
    discount: float,
    n_hare: int,
    hare_reward: float = HARE_REWARD,
    stag_reward: float = STAG_REWARD,
) -> PropensityMatrix:
    """One batch Stag Hunt update; hare rows and stag rows evolve independently.

    Hare hunter i < n_hare:  W[i,j] <- (1-x) W[i,j] + 3 * (covering trios).
    Stag hunter i >= n_hare: W[i,j] <- (1-x) W[i,j] + 4 * (covering all-stag trios).
    """
    n = w.n_agents
    if record.time != w.time:
        raise ValueError(f"choices at time {record.time} cannot update W at time {w.time}")
    if n != 2 * n_hare:
        raise ValueError(f"population {n} does not match n_hare={n_hare}")
    counts = _coverage_counts(record, n)
    stag_counts = np.zeros((n, n), dtype=np.float64)
    for choice in record.choices:
        members = sorted(choice.members)
        if members[0] >= n_hare:
            a, b, c = members
            for r, s in ((a, b), (a, c), (b, c)):
                stag_counts[r, s] += 1.0
                stag_counts[s, r] += 1.0
    out = (1.0 - discount) * w.entries
    out[:n_hare] += hare_reward * counts[:n_hare]
    out[n_hare:] += stag_reward * stag_counts[n_hare:]
    np.fill_diagonal(out, 0.0)
    return PropensityMatrix(out, time=w.time + 1)


def step(
    config: ModelConfig,
    w: PropensityMatrix,
    rng: np.random.Generator,
) -> tuple[PropensityMatrix, StepRecord]:
    """Advance the population by one round.

    Every propensity first decays by (1 - x); agents then take turns in id
    order, each sampling a trio from the current matrix, and the collusion
    pays off immediately (each member reinforces her own row toward the other
    two).  Later choosers in the round therefore see the reinforcement of
    earlier collusions.  The total-weight recurrence
    sum W(t+1) = (1-x) sum W(t) + 3N is exact under this scheme, as in a
    simultaneous batch update; ``sample_trios`` plus the ``reinforce_*``
    operations remain available to compose a batch round explicitly.

    Consumes exactly N uniforms, one per agent in id order.
    """
    n = config.n_agents
    tables = trio_tables(n)
    arr = (1.0 - config.discount) * w.entries
    arr[arr < WEIGHT_FLOOR] = 0.0
    is_stag = config.game is Game.STAG_HUNT
    if is_stag:
        n_hare = config.n_hare
        flags = all_stag_flags(n, n_hare)
    uniforms = rng.random(n)
    choices = []
    for i in range(n):
        tid = sample_trio_index(arr, i, config.rule, uniforms[i])
        a, b, c = (int(v) for v in tables.trios[tid])
        choices.append(TrioChoice(chooser=i, members=(a, b, c)))
        if not is_stag:
            r = config.trio_reward
            arr[a, b] += r
            arr[b, a] += r
            arr[a, c] += r
            arr[c, a] += r
            arr[b, c] += r
            arr[c, b] += r
        else:
            stag_trio = bool(flags[tid])
            for m, p, q in ((a, b, c), (b, a, c), (c, a, b)):
                if m < n_hare:
                    arr[m, p] += config.hare_reward
                    arr[m, q] += config.hare_reward
                elif stag_trio:
                    arr[m, p] += config.stag_reward
                    arr[m, q] += config.stag_reward
    return PropensityMatrix(arr, time=w.time + 1), StepRecord(
        time=w.time, choices=tuple(choices)
    )


def cross_group_choice_probability(
    w: PropensityMatrix,
    group: Iterable[int],
    agent: int,
    rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL,
) -> float:
    """Probability that ``agent`` samples a trio reaching outside ``group``."""
    members = frozenset(int(g) for g in group)
    if agent not in members:
        raise ValueError(f"agent {agent} is not in the group")
    dist = trio_distribution(w, agent, rule)
    inside = np.array(
        [all(int(v) in members for v in row) for row in dist.members], dtype=bool
    )
    return float(dist.probs[~inside].sum())


def closed_form_total_weight(n_agents: int, discount: float, t: int) -> float:
    """Exact total unordered-edge weight of Three's Company after t steps.

    Solves S(t+1) = (1-x) S(t) + 3N from S(0) = C(N,2): every agent's trio
    adds 1 to exactly three edges, so the per-step total inflow is 3N.
    """
    fixed_point = 3.0 * n_agents / discount
    start = n_agents * (n_agents - 1) / 2.0
    return fixed_point + (start - fixed_point) * (1.0 - discount) ** t
