import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_bandit.model import (
    PreferenceScenario,
    UtilityWeights,
    expected_step_utility,
    optimal_cumulative_utility,
    optimal_topic,
    step_utilities,
)


def scenario(weights, self_weight, q, x, mu=None, horizon=1):
    return PreferenceScenario(
        UtilityWeights(np.asarray(weights, float), self_weight),
        np.asarray(q, float),
        np.asarray(x, float),
        None if mu is None else np.asarray(mu, float),
        horizon,
    )


class TestUtilityWeights:
    def test_rejects_weights_off_simplex(self):
        with pytest.raises(ValueError):
            UtilityWeights(np.array([0.5, 0.5]), 0.5)

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            UtilityWeights(np.array([-0.1, 0.6]), 0.5)

    def test_accepts_tiny_simplex_deviation(self):
        w = UtilityWeights(np.array([0.3, 0.7 - 1e-12]), 1e-12)
        assert w.follower_weights.shape == (2,)

    def test_arrays_are_read_only(self):
        w = UtilityWeights(np.array([0.5]), 0.5)
        with pytest.raises(ValueError):
            w.follower_weights[0] = 0.9


class TestExpectedStepUtility:
    def test_self_weight_only_returns_own_preference(self):
        sc = scenario([0.0], 1.0, [[0.3]], [0.8])
        assert expected_step_utility(sc, 0) == pytest.approx(0.8)

    def test_hand_evaluated_mixture(self):
        # one follower, a_v = a_u = 0.5, q = 0.9, x = 0.2
        sc = scenario([0.5], 0.5, [[0.9]], [0.2])
        assert expected_step_utility(sc, 0) == pytest.approx(0.55)

    def test_all_zero_preferences_give_zero(self):
        sc = scenario([0.5], 0.5, [[0.0], [0.0]], [0.0, 0.0])
        assert expected_step_utility(sc, 0) == 0.0
        assert expected_step_utility(sc, 1) == 0.0

    def test_invalid_topic_raises(self):
        sc = scenario([0.5], 0.5, [[0.9]], [0.2])
        with pytest.raises(IndexError):
            expected_step_utility(sc, 5)

    def test_matches_step_utilities_vector(self):
        sc = scenario([0.2, 0.3], 0.5, [[0.9, 0.1], [0.5, 0.5]], [0.2, 0.8])
        utils = step_utilities(sc)
        for c in range(2):
            assert utils[c] == pytest.approx(expected_step_utility(sc, c))


class TestOptimalTopic:
    def test_hand_evaluated_argmax(self):
        # scores 0.55 vs 0.65
        sc = scenario([0.5], 0.5, [[0.9], [0.5]], [0.2, 0.8])
        assert optimal_topic(sc) == 1

    def test_full_tie_breaks_to_lowest_index(self):
        sc = scenario([0.5], 0.5, [[0.4], [0.4], [0.4]], [0.4, 0.4, 0.4])
        assert optimal_topic(sc) == 0

    def test_single_topic(self):
        sc = scenario([0.5], 0.5, [[0.4]], [0.4])
        assert optimal_topic(sc) == 0


class TestOptimalCumulativeUtility:
    def test_scales_with_horizon(self):
        sc = scenario([0.5], 0.5, [[0.9], [0.5]], [0.2, 0.8], horizon=10)
        assert optimal_cumulative_utility(sc) == pytest.approx(6.5)

    def test_single_step_equals_step_utility(self):
        sc = scenario([0.5], 0.5, [[0.9], [0.5]], [0.2, 0.8], horizon=1)
        best = expected_step_utility(sc, optimal_topic(sc))
        assert optimal_cumulative_utility(sc) == pytest.approx(best)

    def test_zero_utilities(self):
        sc = scenario([1.0], 0.0, [[0.0]], [0.7], horizon=10)
        assert optimal_cumulative_utility(sc) == 0.0


@st.composite
def random_scenarios(draw, max_topics=32, max_followers=6):
    k = draw(st.integers(1, max_topics))
    n = draw(st.integers(1, max_followers))
    raw = draw(
        st.lists(st.floats(0.01, 1.0), min_size=n + 1, max_size=n + 1)
    )
    coords = np.asarray(raw) / np.sum(raw)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    q = rng.random((k, n))
    x = rng.random(k)
    return PreferenceScenario(
        UtilityWeights(coords[:-1], float(coords[-1])), q, x, None, 1
    )


@given(random_scenarios())
@settings(max_examples=60, deadline=None)
def test_utilities_stay_in_unit_interval(sc):
    utils = step_utilities(sc)
    assert np.all(utils >= -1e-12)
    assert np.all(utils <= 1 + 1e-12)


@given(random_scenarios())
@settings(max_examples=60, deadline=None)
def test_optimal_topic_dominates_every_other(sc):
    best = optimal_topic(sc)
    utils = step_utilities(sc)
    assert np.all(utils[best] >= utils - 1e-12)
    # ties resolve to the lowest index
    assert best == int(np.argmax(utils))


@given(random_scenarios(max_topics=6), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_follower_permutation_leaves_utility_unchanged(sc, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(sc.q.shape[1])
    permuted = PreferenceScenario(
        UtilityWeights(sc.weights.follower_weights[perm], sc.weights.self_weight),
        sc.q[:, perm],
        sc.x,
        None,
        sc.horizon,
    )
    for c in range(sc.q.shape[0]):
        assert expected_step_utility(permuted, c) == pytest.approx(
            expected_step_utility(sc, c)
        )


class TestScenarioValidation:
    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            scenario([0.5], 0.5, [[0.9, 0.1]], [0.2])

    def test_out_of_range_q_rejected(self):
        with pytest.raises(ValueError):
            scenario([0.5], 0.5, [[1.5]], [0.2])

    def test_negative_mu_rejected(self):
        with pytest.raises(ValueError):
            scenario([0.5], 0.5, [[0.9]], [0.2], mu=[[-1.0]])

    def test_mu_defaults_to_zero(self):
        sc = scenario([0.5], 0.5, [[0.9]], [0.2])
        assert np.all(sc.mu == 0.0)

    def test_negative_horizon_rejected(self):
        with pytest.raises(ValueError):
            scenario([0.5], 0.5, [[0.9]], [0.2], horizon=-1)
