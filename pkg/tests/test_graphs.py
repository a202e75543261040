"""Interaction graphs, closure, window unions, trap detection, stag outcomes."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trionet import (
    Game,
    InteractionGraph,
    ModelConfig,
    PropensityMatrix,
    StepRecord,
    TrapCriterion,
    TrioChoice,
    TrioWeightRule,
    classify_stag_outcome,
    components,
    detect_trap,
    evaluate_trap,
    init_weights,
    interaction_graph,
    transitive_closure,
    window_union,
)


def record_from(trios, n=None) -> StepRecord:
    n = n if n is not None else len(trios)
    return StepRecord(
        time=0,
        choices=tuple(
            TrioChoice(chooser=i, members=tuple(sorted(trios[i]))) for i in range(n)
        ),
    )


def graph(n, edges) -> InteractionGraph:
    return InteractionGraph(n, frozenset(tuple(sorted(e)) for e in edges))


@st.composite
def graphs(draw):
    n = draw(st.integers(min_value=3, max_value=9))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.sets(st.sampled_from(pairs)))
    return InteractionGraph(n, frozenset(edges))


class TestInteractionGraph:
    def test_two_disjoint_triangles(self):
        rec = record_from({0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2),
                           3: (3, 4, 5), 4: (3, 4, 5), 5: (3, 4, 5)})
        g = interaction_graph(rec)
        assert g.edges == frozenset({(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)})

    def test_overlapping_triangles_union(self):
        rec = record_from({0: (0, 1, 2), 1: (1, 2, 3), 2: (0, 1, 2), 3: (1, 2, 3)})
        g = interaction_graph(rec)
        assert g.edges == frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)})

    def test_minimum_degree_two(self):
        rng = np.random.default_rng(3)
        config = ModelConfig(7, 0.4)
        from trionet import sample_trios

        w = init_weights(config)
        for _ in range(25):
            rec = sample_trios(w, TrioWeightRule.SEQUENTIAL, rng)
            g = interaction_graph(rec)
            assert min(g.degree(v) for v in range(7)) >= 2


class TestTransitiveClosure:
    def test_path_closes_to_triangle(self):
        g = graph(3, [(0, 1), (1, 2)])
        closure, partition = transitive_closure(g)
        assert closure.edges == frozenset({(0, 1), (0, 2), (1, 2)})
        assert partition.blocks == ((0, 1, 2),)

    def test_disjoint_triangles_unchanged(self):
        g = graph(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])
        closure, partition = transitive_closure(g)
        assert closure.edges == g.edges
        assert partition.sizes == (3, 3)

    def test_mixed_components(self):
        g = graph(6, [(0, 1), (1, 2), (2, 3), (4, 5)])
        closure, partition = transitive_closure(g)
        expected = set(itertools.combinations(range(4), 2)) | {(4, 5)}
        assert closure.edges == frozenset(expected)
        assert partition.sizes == (2, 4)

    @settings(max_examples=150, deadline=None)
    @given(graphs())
    def test_closure_laws(self, g):
        closure, partition = transitive_closure(g)
        again, partition2 = transitive_closure(closure)
        assert again.edges == closure.edges
        assert partition2 == partition
        assert partition == components(g)
        rebuilt = set()
        for block in partition.blocks:
            rebuilt.update(itertools.combinations(block, 2))
        assert closure.edges == frozenset(rebuilt)
        flat = sorted(v for b in partition.blocks for v in b)
        assert flat == list(range(g.n_agents))


class TestWindowUnion:
    def test_idempotent_single(self):
        g = graph(4, [(0, 1), (2, 3)])
        assert window_union([g, g]).edges == g.edges

    def test_simple_union(self):
        a = graph(4, [(0, 1)])
        b = graph(4, [(1, 2)])
        assert window_union([a, b]).edges == frozenset({(0, 1), (1, 2)})

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            window_union([])

    def test_inconsistent_vertex_counts_rejected(self):
        with pytest.raises(ValueError):
            window_union([graph(4, []), graph(5, [])])

    @settings(max_examples=80, deadline=None)
    @given(st.integers(3, 8), st.data())
    def test_union_laws(self, n, data):
        pairs = list(itertools.combinations(range(n), 2))
        gs = [
            InteractionGraph(n, frozenset(data.draw(st.sets(st.sampled_from(pairs)))))
            for _ in range(3)
        ]
        a, b, c = gs
        assert window_union([a, b]).edges == window_union([b, a]).edges
        assert (
            window_union([window_union([a, b]), c]).edges
            == window_union([a, window_union([b, c])]).edges
        )
        assert window_union([a, a]).edges == a.edges

    def test_within_block_choices_refine_blocks(self):
        rng = np.random.default_rng(17)
        blocks = [(0, 1, 2, 3), (4, 5, 6)]
        graphs_list = []
        for _ in range(30):
            trios = {}
            for block in blocks:
                for agent in block:
                    others = [v for v in block if v != agent]
                    pick = rng.choice(len(others), 2, replace=False)
                    trios[agent] = (agent, others[pick[0]], others[pick[1]])
            graphs_list.append(interaction_graph(record_from(trios, n=7)))
        union = window_union(graphs_list)
        _, partition = transitive_closure(union)
        for got in partition.blocks:
            assert any(set(got) <= set(b) for b in blocks)


def block_diag_weights(n=6, inner=5.0, cross=1e-12) -> PropensityMatrix:
    w = np.full((n, n), cross)
    for block in ((0, 1, 2), (3, 4, 5)):
        for a in block:
            for b in block:
                w[a, b] = inner
    np.fill_diagonal(w, 0.0)
    return PropensityMatrix(w)


def two_triangle_graphs(count):
    rec = record_from({0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2),
                       3: (3, 4, 5), 4: (3, 4, 5), 5: (3, 4, 5)})
    return [interaction_graph(rec)] * count


class TestDetectTrap:
    def test_isolated_triangles_trap(self):
        w = block_diag_weights()
        criterion = TrapCriterion(window=10)
        report = detect_trap(two_triangle_graphs(10), w, criterion, Game.THREES_COMPANY)
        assert report.trapped
        assert report.sizes == (3, 3)
        assert report.sizes_allowed is True
        assert report.max_cross_probability < criterion.epsilon

    def test_connected_union_is_not_a_trap(self):
        w = init_weights(ModelConfig(6, 0.5))
        rec = record_from({i: (i, (i + 1) % 6, (i + 2) % 6) for i in range(6)})
        criterion = TrapCriterion(window=4)
        report = detect_trap([interaction_graph(rec)] * 4, w, criterion, Game.THREES_COMPANY)
        assert not report.trapped
        assert report.partition.sizes == (6,)
        assert report.max_cross_probability == 0.0

    def test_high_cross_probability_blocks_trap(self):
        w = init_weights(ModelConfig(6, 0.5))  # uniform weights: cross prob far above eps
        criterion = TrapCriterion(window=5)
        report = detect_trap(two_triangle_graphs(5), w, criterion, Game.THREES_COMPANY)
        assert not report.trapped
        assert report.max_cross_probability > criterion.epsilon

    def test_window_length_precondition(self):
        w = block_diag_weights()
        with pytest.raises(ValueError):
            detect_trap(two_triangle_graphs(4), w, TrapCriterion(window=5), Game.THREES_COMPANY)

    def test_vertex_count_mismatch(self):
        w = init_weights(ModelConfig(7, 0.5))
        with pytest.raises(ValueError):
            detect_trap(two_triangle_graphs(3), w, TrapCriterion(window=3), Game.THREES_COMPANY)

    def test_monotone_in_epsilon_and_window(self):
        w = block_diag_weights()
        base = detect_trap(
            two_triangle_graphs(10), w, TrapCriterion(window=10), Game.THREES_COMPANY
        )
        assert base.trapped
        wider = detect_trap(
            two_triangle_graphs(10), w, TrapCriterion(epsilon=0.05, window=10), Game.THREES_COMPANY
        )
        assert wider.trapped
        shorter = detect_trap(
            two_triangle_graphs(3), w, TrapCriterion(window=3), Game.THREES_COMPANY
        )
        assert shorter.trapped

    def test_oversize_blocks_reported_but_flagged(self):
        rec = record_from({i: (i, (i + 1) % 6, (i + 2) % 6) for i in range(6)})
        big = interaction_graph(rec)
        extra = graph(8, list(big.edges) + [(6, 7)])
        w = np.full((8, 8), 1e-12)
        for a, b in extra.edges:
            w[a, b] = w[b, a] = 5.0
        for block in ((0, 1, 2, 3, 4, 5), (6, 7)):
            for a in block:
                for b in block:
                    if a != b:
                        w[a, b] = 5.0
        np.fill_diagonal(w, 0.0)
        report = evaluate_trap(
            extra, PropensityMatrix(w), TrapCriterion(), Game.THREES_COMPANY,
            TrioWeightRule.SEQUENTIAL,
        )
        assert report.partition.sizes == (2, 6)
        assert report.sizes_allowed is False


class TestClassifyStagOutcome:
    def test_settled_cliques_have_no_attachments(self):
        n, n_hare = 8, 4
        w = np.full((n, n), 1e-9)
        for block in ((0, 1, 2, 3), (4, 5, 6, 7)):
            for a in block:
                for b in block:
                    w[a, b] = 6.0
        np.fill_diagonal(w, 0.0)
        wm = PropensityMatrix(w)
        _, partition = transitive_closure(
            graph(n, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)])
        )
        outcome = classify_stag_outcome(partition, wm, n_hare)
        kinds = [b.kind for b in outcome.blocks]
        assert kinds == ["hare_clique", "stag_clique"]
        assert outcome.attached_count == 0

    def test_one_hare_calling_a_stag_pair(self):
        n, n_hare = 10, 5
        w = np.full((n, n), 1e-9)
        w[0, 5] = w[0, 6] = 50.0          # hare 0 fixated on the stag pair (5, 6)
        for block in ((1, 2, 3, 4), (5, 6, 7, 8, 9)):
            for a in block:
                for b in block:
                    if a != b:
                        w[a, b] = 8.0
        np.fill_diagonal(w, 0.0)
        wm = PropensityMatrix(w)
        _, partition = transitive_closure(
            graph(n, [(0, 5), (0, 6)]
                  + list(itertools.combinations((1, 2, 3, 4), 2))
                  + list(itertools.combinations((5, 6, 7, 8, 9), 2)))
        )
        outcome = classify_stag_outcome(partition, wm, n_hare)
        assert outcome.attached_hares == (0,)
        attachment = [b for b in outcome.blocks if b.kind == "attachment"]
        assert len(attachment) == 1 and attachment[0].hare_count == 1
        assert outcome.attachment_kind(attachment[0]) == "one_hare_calling_stags"

    def test_two_hares_calling_one_stag(self):
        n, n_hare = 10, 5
        w = np.full((n, n), 1e-9)
        w[0, 1] = w[0, 5] = 50.0          # hares 0 and 1 both call stag 5
        w[1, 0] = w[1, 5] = 50.0
        for block in ((2, 3, 4), (5, 6, 7, 8, 9)):
            for a in block:
                for b in block:
                    if a != b:
                        w[a, b] = 8.0
        np.fill_diagonal(w, 0.0)
        wm = PropensityMatrix(w)
        _, partition = transitive_closure(
            graph(n, [(0, 1), (0, 5), (1, 5)]
                  + list(itertools.combinations((2, 3, 4), 2))
                  + list(itertools.combinations((5, 6, 7, 8, 9), 2)))
        )
        outcome = classify_stag_outcome(partition, wm, n_hare)
        assert outcome.attached_hares == (0, 1)
        attachment = [b for b in outcome.blocks if b.kind == "attachment"]
        assert attachment[0].hare_count == 2
        assert outcome.attachment_kind(attachment[0]) == "two_hares_calling_stags"
