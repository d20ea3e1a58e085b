import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mjsbench import (
    CapExceeded,
    MarkovChain,
    NotErgodic,
    estimate_transition,
    is_ergodic,
    mixing_time,
    sample_path,
    stationary_distribution,
)
from mjsbench.markov import row_distances_to_stationary


def random_ergodic_chain(seed, s=4):
    rng = np.random.default_rng(seed)
    return MarkovChain(T=rng.dirichlet(np.ones(s) * 2.0, size=s))


class TestConstruction:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ValueError):
            MarkovChain(T=np.array([[0.5, 0.6], [0.3, 0.7]]))

    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            MarkovChain(T=np.array([[1.1, -0.1], [0.5, 0.5]]))

    def test_immutable(self, two_mode_scalar_chain):
        with pytest.raises(ValueError):
            two_mode_scalar_chain.T[0, 0] = 0.0


class TestStationaryDistribution:
    def test_hand_solved_two_state(self, two_mode_scalar_chain):
        # pi solves pi^T (T - I) = 0 with sum 1: (3/7, 4/7) for this chain.
        result = stationary_distribution(two_mode_scalar_chain)
        np.testing.assert_allclose(result.pi, [3 / 7, 4 / 7], atol=1e-12)
        assert result.pi_min == pytest.approx(3 / 7)

    def test_reducible_chain_rejected(self):
        with pytest.raises(NotErgodic):
            stationary_distribution(MarkovChain(T=np.eye(2)))

    def test_periodic_chain_rejected(self):
        with pytest.raises(NotErgodic):
            stationary_distribution(MarkovChain(T=np.array([[0.0, 1.0], [1.0, 0.0]])))

    def test_residual_small(self):
        chain = random_ergodic_chain(3, s=6)
        pi = stationary_distribution(chain).pi
        assert np.abs(pi @ chain.T - pi).sum() <= 1e-10

    def test_single_mode(self):
        result = stationary_distribution(MarkovChain(T=np.array([[1.0]])))
        np.testing.assert_allclose(result.pi, [1.0])


class TestErgodicityCheck:
    def test_positive_chain_is_ergodic(self, two_mode_scalar_chain):
        assert is_ergodic(two_mode_scalar_chain)

    def test_identity_not_ergodic(self):
        assert not is_ergodic(MarkovChain(T=np.eye(3)))

    def test_period_two_not_ergodic(self):
        assert not is_ergodic(MarkovChain(T=np.array([[0.0, 1.0], [1.0, 0.0]])))

    def test_three_cycle_not_ergodic(self):
        T = np.zeros((3, 3))
        T[0, 1] = T[1, 2] = T[2, 0] = 1.0
        assert not is_ergodic(MarkovChain(T=T))

    def test_cycle_with_self_loop_is_ergodic(self):
        T = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        assert is_ergodic(MarkovChain(T=T))


class TestMixingTime:
    def test_rank_one_chain_mixes_in_one_step(self):
        pi = np.array([0.2, 0.5, 0.3])
        chain = MarkovChain(T=np.tile(pi, (3, 1)))
        assert mixing_time(chain) == 1

    def test_hand_computed_two_state(self, two_mode_scalar_chain):
        # At t=1 the worst row distance is 2*|0.6 - 3/7| ~ 0.343 <= 0.5.
        assert mixing_time(two_mode_scalar_chain, epsilon=0.5) == 1

    def test_matches_brute_force_powering(self):
        chain = MarkovChain(T=np.array([[0.99, 0.01], [0.01, 0.99]]))
        pi = stationary_distribution(chain).pi
        expected = None
        for t in range(1, 2000):
            rows = np.linalg.matrix_power(chain.T, t)
            if np.abs(rows - pi).sum(axis=1).max() <= 0.5:
                expected = t
                break
        assert expected is not None
        assert mixing_time(chain, epsilon=0.5, cap=2000) == expected

    def test_cap_exceeded(self):
        chain = MarkovChain(T=np.array([[0.999, 0.001], [0.001, 0.999]]))
        with pytest.raises(CapExceeded):
            mixing_time(chain, epsilon=0.01, cap=3)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_monotone_nonincreasing_in_epsilon(self, seed):
        chain = random_ergodic_chain(seed)
        t_loose = mixing_time(chain, epsilon=0.6, cap=10_000)
        t_tight = mixing_time(chain, epsilon=0.2, cap=10_000)
        assert t_tight >= t_loose

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_row_distance_nonincreasing_along_powering(self, seed):
        chain = random_ergodic_chain(seed)
        d = row_distances_to_stationary(chain, horizon=40)
        assert np.all(np.diff(d) <= 1e-12)


class TestSamplePath:
    def test_deterministic_permutation_alternates(self):
        chain = MarkovChain(T=np.array([[0.0, 1.0], [1.0, 0.0]]))
        path = sample_path(chain, 0, 8, rng_seed=5)
        np.testing.assert_array_equal(path, [0, 1, 0, 1, 0, 1, 0, 1])

    def test_same_seed_same_path(self, two_mode_scalar_chain):
        a = sample_path(two_mode_scalar_chain, np.array([0.5, 0.5]), 1000, rng_seed=9)
        b = sample_path(two_mode_scalar_chain, np.array([0.5, 0.5]), 1000, rng_seed=9)
        np.testing.assert_array_equal(a, b)

    def test_empirical_frequencies_approach_truth(self, two_mode_scalar_chain):
        path = sample_path(two_mode_scalar_chain, np.array([0.5, 0.5]), 100_000, rng_seed=2)
        est = estimate_transition(path, num_modes=2)
        assert np.abs(est.chain.T - two_mode_scalar_chain.T).max() <= 0.02


class TestEstimateTransition:
    def test_deterministic_alternation(self):
        est = estimate_transition(np.array([0, 1, 0, 1, 0]))
        np.testing.assert_allclose(est.chain.T, [[0.0, 1.0], [1.0, 0.0]])
        assert est.unvisited == ()

    def test_unvisited_row_uniform_and_flagged(self):
        est = estimate_transition(np.array([0, 0, 0, 0]), num_modes=2)
        np.testing.assert_allclose(est.chain.T[0], [1.0, 0.0])
        np.testing.assert_allclose(est.chain.T[1], [0.5, 0.5])
        assert est.unvisited == (1,)

    def test_concentration_on_long_path(self, two_mode_scalar_chain):
        path = sample_path(two_mode_scalar_chain, np.array([0.5, 0.5]), 10_000, rng_seed=17)
        est = estimate_transition(path, num_modes=2)
        err = np.abs(est.chain.T - two_mode_scalar_chain.T).sum(axis=1).max()
        assert err <= 0.05

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_rows_times_visits_are_integer_counts(self, seed):
        chain = random_ergodic_chain(seed)
        path = sample_path(chain, np.full(4, 0.25), 500, rng_seed=seed)
        est = estimate_transition(path, num_modes=4)
        for j in range(4):
            if j in est.unvisited:
                continue
            recovered = est.chain.T[j] * est.visit_counts[j]
            np.testing.assert_allclose(recovered, est.transition_counts[j], atol=1e-9)

    def test_stationary_of_estimate_converges(self, two_mode_scalar_chain):
        pi_true = stationary_distribution(two_mode_scalar_chain).pi
        errs = []
        for length in (1_000, 100_000):
            path = sample_path(two_mode_scalar_chain, np.array([0.5, 0.5]), length, rng_seed=4)
            est = estimate_transition(path, num_modes=2)
            pi_hat = stationary_distribution(est.chain).pi
            errs.append(np.abs(pi_hat - pi_true).sum())
        assert errs[1] < errs[0]
