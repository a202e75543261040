"""Core dynamics: initialization, choice distributions, reinforcement, stepping."""

import itertools
import math

import numpy as np
import pytest

from trionet import (
    DegenerateDistributionError,
    Game,
    ModelConfig,
    PropensityMatrix,
    StepRecord,
    TrioChoice,
    TrioWeightRule,
    closed_form_total_weight,
    cross_group_choice_probability,
    init_weights,
    reinforce_stag_hunt,
    reinforce_threes_company,
    sample_trios,
    step,
    trio_distribution,
)
from trionet.dynamics import sample_trio_index

from conftest import oracle_probs, random_matrix

ALL_RULES = list(TrioWeightRule)


class TestInitWeights:
    def test_all_ones_off_diagonal(self):
        w = init_weights(ModelConfig(4, 0.5))
        expected = np.ones((4, 4)) - np.eye(4)
        assert np.array_equal(w.entries, expected)
        assert w.time == 0

    def test_diagonal_zero(self):
        w = init_weights(ModelConfig(4, 0.5))
        assert w.entries[1, 1] == 0.0

    def test_unordered_pair_sum(self):
        w = init_weights(ModelConfig(6, 0.5))
        assert np.triu(w.entries, k=1).sum() == 15.0

    def test_rejects_small_population(self):
        with pytest.raises(ValueError):
            ModelConfig(3, 0.5)

    def test_rejects_odd_stag_population(self):
        with pytest.raises(ValueError):
            ModelConfig(7, 0.5, game=Game.STAG_HUNT)


class TestTrioDistribution:
    def test_uniform_weights_are_uniform(self):
        w = init_weights(ModelConfig(4, 0.5))
        for rule in ALL_RULES:
            dist = trio_distribution(w, 0, rule)
            assert np.allclose(dist.probs, 1.0 / 3.0, atol=1e-12)

    def test_literal_single_heavy_edge_n4(self):
        w = init_weights(ModelConfig(4, 0.5))
        w.entries[0, 1] = w.entries[1, 0] = 2.0
        dist = trio_distribution(w, 0, TrioWeightRule.LITERAL)
        assert [tuple(m) for m in dist.members] == [(0, 1, 2), (0, 1, 3), (0, 2, 3)]
        assert np.allclose(dist.probs, [0.4, 0.4, 0.2])

    def test_literal_single_heavy_edge_n5(self):
        w = init_weights(ModelConfig(5, 0.5))
        w.entries[0, 1] = w.entries[1, 0] = 3.0
        dist = trio_distribution(w, 2, TrioWeightRule.LITERAL)
        probs = {tuple(m): p for m, p in zip(dist.members, dist.probs)}
        assert probs[(0, 1, 2)] == pytest.approx(3.0 / 8.0)
        for members, p in probs.items():
            if members != (0, 1, 2):
                assert p == pytest.approx(1.0 / 8.0)

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_matches_enumeration_oracle(self, rule):
        rng = np.random.default_rng(7)
        for n in (4, 5, 7):
            w = random_matrix(rng, n)
            for chooser in range(n):
                dist = trio_distribution(w, chooser, rule)
                assert np.allclose(dist.probs, oracle_probs(w.entries, chooser, rule), atol=1e-12)

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_normalization_and_sign(self, rule):
        rng = np.random.default_rng(11)
        for _ in range(20):
            w = random_matrix(rng, int(rng.integers(4, 9)))
            chooser = int(rng.integers(w.n_agents))
            dist = trio_distribution(w, chooser, rule)
            assert abs(dist.probs.sum() - 1.0) < 1e-12
            assert (dist.probs >= 0.0).all()

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_scale_invariance(self, rule):
        rng = np.random.default_rng(13)
        w = random_matrix(rng, 6)
        for c in (1e-6, 0.5, 3.0, 1e7):
            scaled = PropensityMatrix(c * w.entries)
            base = trio_distribution(w, 2, rule)
            other = trio_distribution(scaled, 2, rule)
            assert np.allclose(base.probs, other.probs, atol=1e-12)

    def test_degenerate_distribution_raises(self):
        w = init_weights(ModelConfig(5, 0.5))
        w.entries[0, :] = 0.0
        w.entries[:, 0] = 0.0
        with pytest.raises(DegenerateDistributionError):
            trio_distribution(w, 0, TrioWeightRule.LITERAL)

    def test_sequential_needs_two_positive_partners(self):
        w = init_weights(ModelConfig(5, 0.5))
        w.entries[0, :] = 0.0
        w.entries[0, 1] = 1.0
        with pytest.raises(DegenerateDistributionError):
            trio_distribution(w, 0, TrioWeightRule.SEQUENTIAL)


class TestSampleTrios:
    def test_empirical_frequencies_match_uniform(self):
        # 300k single-agent draws against the exact 1/3 probabilities
        w = init_weights(ModelConfig(4, 0.5))
        rng = np.random.default_rng(2024)
        uniforms = rng.random(300_000)
        counts = np.zeros(3)
        for u in uniforms:
            counts[sample_trio_index(w.entries, 0, TrioWeightRule.SEQUENTIAL, u)] += 1
        freqs = counts / counts.sum()
        assert np.all(np.abs(freqs - 1.0 / 3.0) < 0.005)

    @pytest.mark.parametrize("rule", [TrioWeightRule.LITERAL, TrioWeightRule.SEQUENTIAL])
    def test_zero_cross_weights_never_sampled(self, rule):
        w = init_weights(ModelConfig(6, 0.5))
        w.entries[:3, 3:] = 0.0
        w.entries[3:, :3] = 0.0
        rng = np.random.default_rng(5)
        for _ in range(200):
            record = sample_trios(w, rule, rng)
            for choice in record.choices:
                block = {m < 3 for m in choice.members}
                assert len(block) == 1

    def test_same_seed_same_choices(self):
        w = init_weights(ModelConfig(6, 0.5))
        a = sample_trios(w, TrioWeightRule.SEQUENTIAL, np.random.default_rng(99))
        b = sample_trios(w, TrioWeightRule.SEQUENTIAL, np.random.default_rng(99))
        assert a == b


def make_record(n: int, trios, time: int = 0) -> StepRecord:
    return StepRecord(
        time=time,
        choices=tuple(
            TrioChoice(chooser=i, members=tuple(sorted(trios[i]))) for i in range(n)
        ),
    )


class TestReinforceThreesCompany:
    def test_pure_decay_for_uncovered_edge(self):
        w = init_weights(ModelConfig(4, 0.5))
        record = make_record(4, {0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2), 3: (0, 1, 3)})
        # pair (2, 3) is covered by no chosen trio
        out = reinforce_threes_company(w, record, 0.5)
        assert out.entries[2, 3] == 0.5
        assert out.time == 1

    def test_hand_counted_coverage(self):
        w = init_weights(ModelConfig(4, 0.5))
        record = make_record(4, {0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2), 3: (0, 1, 3)})
        out = reinforce_threes_company(w, record, 0.5)
        # pair (0, 1) lies in all four chosen trios
        assert out.entries[0, 1] == 0.5 + 4.0
        assert out.entries[1, 0] == 4.5

    def test_total_weight_after_one_step_from_init(self):
        w = init_weights(ModelConfig(6, 0.5))
        rng = np.random.default_rng(3)
        record = sample_trios(w, TrioWeightRule.SEQUENTIAL, rng)
        out = reinforce_threes_company(w, record, 0.5)
        total = np.triu(out.entries, k=1).sum()
        assert total == pytest.approx(0.5 * 15 + 18, abs=1e-12)

    def test_time_mismatch_rejected(self):
        w = init_weights(ModelConfig(4, 0.5))
        record = make_record(4, {i: (i, (i + 1) % 4, (i + 2) % 4) for i in range(4)}, time=3)
        with pytest.raises(ValueError):
            reinforce_threes_company(w, record, 0.5)


class TestReinforceStagHunt:
    def test_all_stag_trio_bounty(self):
        w = init_weights(ModelConfig(6, 0.5, game=Game.STAG_HUNT))
        record = make_record(
            6, {0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2), 3: (3, 4, 5), 4: (0, 1, 4), 5: (0, 1, 5)}
        )
        # only agent 3's trio {3,4,5} is an all-stag trio covering (3, 4)
        out = reinforce_stag_hunt(w, record, 0.5, n_hare=3)
        assert out.entries[3, 4] == 0.5 + 4.0

    def test_hare_row_vs_stag_row_asymmetry(self):
        w = init_weights(ModelConfig(6, 0.5, game=Game.STAG_HUNT))
        record = make_record(
            6, {0: (0, 2, 3), 1: (1, 2, 3), 2: (1, 2, 3), 3: (1, 2, 3), 4: (0, 1, 4), 5: (3, 4, 5)}
        )
        # {0,1,4} chosen by agent 4 is the only trio containing agent 0 and 4
        out = reinforce_stag_hunt(w, record, 0.5, n_hare=3)
        assert out.entries[0, 4] == 0.5 * 1.0 + 3.0   # hare row, reward 3
        assert out.entries[4, 0] == 0.5 * 1.0         # stag row, mixed trio pays nothing

    def test_uncovered_pair_decays(self):
        w = init_weights(ModelConfig(6, 0.5, game=Game.STAG_HUNT))
        record = make_record(6, {i: (0, 1, 2) if i < 3 else (3, 4, 5) for i in range(6)})
        out = reinforce_stag_hunt(w, record, 0.5, n_hare=3)
        assert out.entries[0, 3] == 0.5

    def test_population_mismatch_rejected(self):
        w = init_weights(ModelConfig(6, 0.5, game=Game.STAG_HUNT))
        record = make_record(6, {i: (0, 1, 2) if i < 3 else (3, 4, 5) for i in range(6)})
        with pytest.raises(ValueError):
            reinforce_stag_hunt(w, record, 0.5, n_hare=2)


class TestStep:
    def test_total_weight_conservation_identity(self):
        # oracle: iterate the scalar recurrence S <- (1-x) S + 3N
        config = ModelConfig(6, 0.5)
        rng = np.random.default_rng(42)
        w = init_weights(config)
        s = 15.0
        for t in range(1, 201):
            w, _ = step(config, w, rng)
            s = 0.5 * s + 18.0
            total = np.triu(w.entries, k=1).sum()
            assert total == pytest.approx(s, rel=1e-12)
            assert total == pytest.approx(closed_form_total_weight(6, 0.5, t), rel=1e-12)

    def test_closed_form_matches_recurrence_oracle(self):
        s = 15.0
        for t in range(1, 500):
            s = 0.7 * s + 18.0
            assert closed_form_total_weight(6, 0.3, t) == pytest.approx(s, rel=1e-12)

    def test_symmetry_preserved(self):
        config = ModelConfig(6, 0.4)
        rng = np.random.default_rng(8)
        w = init_weights(config)
        for _ in range(50):
            w, _ = step(config, w, rng)
        assert np.array_equal(w.entries, w.entries.T)

    def test_stag_to_hare_pure_geometric_decay(self):
        config = ModelConfig(8, 0.37, game=Game.STAG_HUNT)
        rng = np.random.default_rng(9)
        w = init_weights(config)
        expected = 1.0
        for t in range(1, 60):
            w, _ = step(config, w, rng)
            expected = 0.63 * expected
            # stag row 6 toward hare 0: never reinforced, decays exactly
            assert w.entries[6, 0] == expected
        assert w.entries[6, 0] == pytest.approx(0.63**59, rel=1e-12)

    def test_covered_edge_lower_bounds(self):
        # an edge covered at time t satisfies W(e, t+1) >= 1 and then decays
        # no faster than geometrically: W(e, t+k) >= (1-x)^(k-1)
        config = ModelConfig(6, 0.5)
        rng = np.random.default_rng(21)
        w = init_weights(config)
        covered = set()
        for _ in range(30):
            w, record = step(config, w, rng)
            covered = set()
            for choice in record.choices:
                a, b, c = sorted(choice.members)
                covered.update({(a, b), (a, c), (b, c)})
            for a, b in covered:
                assert w.entries[a, b] >= 1.0
        probe = min(covered)
        for k in range(2, 15):
            w, _ = step(config, w, rng)
            assert w.entries[probe] >= 0.5 ** (k - 1) - 1e-15

    def test_record_timestamps_and_choice_shape(self):
        config = ModelConfig(5, 0.3)
        rng = np.random.default_rng(10)
        w = init_weights(config)
        w2, record = step(config, w, rng)
        assert record.time == 0 and w2.time == 1
        assert record.n_agents == 5
        arr = record.member_array()
        assert arr.shape == (5, 3)
        for i, choice in enumerate(record.choices):
            assert choice.chooser == i and i in choice.members


class TestCrossGroupChoiceProbability:
    def test_zero_cross_weights(self):
        w = init_weights(ModelConfig(6, 0.5))
        w.entries[:3, 3:] = 0.0
        w.entries[3:, :3] = 0.0
        assert cross_group_choice_probability(w, {0, 1, 2}, 0, TrioWeightRule.LITERAL) == 0.0

    @pytest.mark.parametrize("rule", ALL_RULES)
    def test_uniform_weights_n4(self, rule):
        w = init_weights(ModelConfig(4, 0.5))
        p = cross_group_choice_probability(w, {0, 1, 2}, 0, rule)
        assert p == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_stag_block_with_weak_cross_edges(self):
        w = init_weights(ModelConfig(6, 0.5))
        for a in (3, 4, 5):
            for b in (3, 4, 5):
                if a != b:
                    w.entries[a, b] = 10.0
        p = cross_group_choice_probability(w, {3, 4, 5}, 3, TrioWeightRule.LITERAL)
        assert p == pytest.approx(63.0 / 1063.0, rel=1e-12)

    def test_agent_must_belong_to_group(self):
        w = init_weights(ModelConfig(4, 0.5))
        with pytest.raises(ValueError):
            cross_group_choice_probability(w, {1, 2}, 0)
