"""Interaction graphs, transitive closure, and trap detection.

The per-step interaction graph has an edge for every pair covered by some
chosen trio, i.e. it is a union of N triangles.  Absorption ("trapping") is an
infinite-time event; here it is operationalized over a finite window: the
population counts as trapped when the window's union graph splits into at
least two components and every agent's probability of choosing outside its
own component is below a small threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import (
    Game,
    PropensityMatrix,
    StepRecord,
    TrioWeightRule,
    cross_group_choice_probability,
)

Edge = tuple[int, int]


@dataclass(frozen=True)
class InteractionGraph:
    """Undirected simple graph over agents 0..n_agents-1; edges stored (a, b) with a < b."""

    n_agents: int
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        for a, b in self.edges:
            if not (0 <= a < b < self.n_agents):
                raise ValueError(f"invalid edge ({a}, {b}) for N={self.n_agents}")

    def degree(self, v: int) -> int:
        return sum(1 for a, b in self.edges if v in (a, b))


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of agents covering the whole population."""

    n_agents: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen = [v for block in self.blocks for v in block]
        if sorted(seen) != list(range(self.n_agents)):
            raise ValueError("blocks must partition the population")

    def block_of(self, agent: int) -> tuple[int, ...]:
        for block in self.blocks:
            if agent in block:
                return block
        raise KeyError(agent)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(sorted(len(b) for b in self.blocks))


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def interaction_graph(record: StepRecord) -> InteractionGraph:
    """Edges covered by the step's chosen trios: the union of N triangles."""
    edges = set()
    for choice in record.choices:
        a, b, c = sorted(choice.members)
        edges.update({(a, b), (a, c), (b, c)})
    return InteractionGraph(record.n_agents, frozenset(edges))


def graph_from_matrix(mask: np.ndarray) -> InteractionGraph:
    """Build a graph from a boolean adjacency matrix (upper triangle read)."""
    n = mask.shape[0]
    rows, cols = np.nonzero(np.triu(mask, k=1))
    return InteractionGraph(n, frozenset(zip(rows.tolist(), cols.tolist())))


def components(graph: InteractionGraph) -> Partition:
    """Connected components as a partition (isolated vertices become singletons)."""
    uf = _UnionFind(graph.n_agents)
    for a, b in graph.edges:
        uf.union(a, b)
    groups: dict[int, list[int]] = {}
    for v in range(graph.n_agents):
        groups.setdefault(uf.find(v), []).append(v)
    blocks = tuple(tuple(sorted(g)) for g in groups.values())
    return Partition(graph.n_agents, tuple(sorted(blocks, key=lambda b: b[0])))


def transitive_closure(graph: InteractionGraph) -> tuple[InteractionGraph, Partition]:
    """Smallest disjoint union of complete graphs containing the input.

    Returns the closure together with the component partition, which is the
    same for the graph and its closure.
    """
    partition = components(graph)
    edges = set()
    for block in partition.blocks:
        for i, a in enumerate(block):
            for b in block[i + 1:]:
                edges.add((a, b))
    return InteractionGraph(graph.n_agents, frozenset(edges)), partition


def window_union(graphs: Sequence[InteractionGraph]) -> InteractionGraph:
    """Edgewise union of a nonempty list of graphs over the same population."""
    if not graphs:
        raise ValueError("window_union needs at least one graph")
    n = graphs[0].n_agents
    edges: set[Edge] = set()
    for g in graphs:
        if g.n_agents != n:
            raise ValueError("graphs have inconsistent vertex counts")
        edges |= g.edges
    return InteractionGraph(n, frozenset(edges))


@dataclass(frozen=True)
class TrapCriterion:
    """Finite-window stand-in for the paper-level notion of absorption.

    ``epsilon`` bounds every agent's cross-block choice probability;
    ``window`` is the number of consecutive steps whose interaction graphs
    must stay block-diagonal; ``allowed_sizes`` is the set of clique sizes a
    fully decomposed Three's Company population can exhibit.
    """

    epsilon: float = 0.005
    window: int = 1000
    allowed_sizes: frozenset[int] = frozenset({3, 4, 5})

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class BlockLabel:
    """Composition label for one partition block of a Stag Hunt population."""

    members: tuple[int, ...]
    kind: str  # 'stag_clique' | 'hare_clique' | 'attachment'
    hare_count: int
    stag_count: int


@dataclass(frozen=True)
class StagOutcome:
    """Stag Hunt trap structure: block labels plus the hare hunters whose
    choice mass concentrates on stag hunters."""

    blocks: tuple[BlockLabel, ...]
    attached_hares: tuple[int, ...]

    @property
    def attached_count(self) -> int:
        return len(self.attached_hares)

    def attachment_kind(self, block: BlockLabel) -> str:
        if block.kind != "attachment":
            return block.kind
        if block.hare_count == 1:
            return "one_hare_calling_stags"
        if block.hare_count == 2:
            return "two_hares_calling_stags"
        return "mixed"


@dataclass(frozen=True)
class TrapReport:
    """Outcome of a trap check over one detection window."""

    trapped: bool
    partition: Partition
    max_cross_probability: float
    sizes: tuple[int, ...]
    detection_time: int | None = None
    sizes_allowed: bool | None = None
    stag_outcome: StagOutcome | None = None

    def at_time(self, t: int) -> "TrapReport":
        return replace(self, detection_time=t)


def classify_stag_outcome(
    partition: Partition,
    w: PropensityMatrix,
    n_hare: int,
    rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL,
) -> StagOutcome:
    """Label blocks by hunter composition and find hares attached to stags.

    A hare hunter counts as attached when the majority of its current choice
    probability lies on trios that include at least one stag hunter.
    """
    labels = []
    for block in partition.blocks:
        hares = sum(1 for v in block if v < n_hare)
        stags = len(block) - hares
        if hares == 0:
            kind = "stag_clique"
        elif stags == 0:
            kind = "hare_clique"
        else:
            kind = "attachment"
        labels.append(BlockLabel(block, kind, hares, stags))
    hare_group = range(n_hare)
    attached = tuple(
        h
        for h in hare_group
        if cross_group_choice_probability(w, hare_group, h, rule) > 0.5
    )
    return StagOutcome(blocks=tuple(labels), attached_hares=attached)


def evaluate_trap(
    union_graph: InteractionGraph,
    w: PropensityMatrix,
    criterion: TrapCriterion,
    game: Game,
    rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL,
) -> TrapReport:
    """Trap check against an already-unioned window graph.

    Trapped requires a genuine split (at least two blocks) with every agent's
    cross-block choice probability under ``criterion.epsilon``.  Every chosen
    trio of the window is automatically inside one block because blocks are
    the components of the window union itself.  Stag Hunt outcome labels are
    attached only once the window has actually split.
    """
    _, partition = transitive_closure(union_graph)
    split = len(partition.blocks) >= 2
    max_cross = 0.0
    if split:
        for block in partition.blocks:
            for agent in block:
                p = cross_group_choice_probability(w, block, agent, rule)
                if p > max_cross:
                    max_cross = p
    # A single all-covering block has nothing outside it, so every cross
    # probability is exactly zero and the loop can be skipped.
    trapped = split and max_cross < criterion.epsilon
    sizes = partition.sizes
    sizes_allowed = None
    stag_outcome = None
    if game is Game.THREES_COMPANY:
        sizes_allowed = all(s in criterion.allowed_sizes for s in sizes)
    elif split:
        stag_outcome = classify_stag_outcome(partition, w, w.n_agents // 2, rule)
    return TrapReport(
        trapped=trapped,
        partition=partition,
        max_cross_probability=max_cross,
        sizes=sizes,
        sizes_allowed=sizes_allowed,
        stag_outcome=stag_outcome,
    )


def detect_trap(
    window_graphs: Sequence[InteractionGraph],
    w: PropensityMatrix,
    criterion: TrapCriterion,
    game: Game,
    rule: TrioWeightRule = TrioWeightRule.SEQUENTIAL,
) -> TrapReport:
    """Trap check over the last ``criterion.window`` interaction graphs."""
    if len(window_graphs) != criterion.window:
        raise ValueError(
            f"expected {criterion.window} window graphs, got {len(window_graphs)}"
        )
    union = window_union(window_graphs)
    if union.n_agents != w.n_agents:
        raise ValueError("graphs and weights have inconsistent vertex counts")
    return evaluate_trap(union, w, criterion, game, rule)
