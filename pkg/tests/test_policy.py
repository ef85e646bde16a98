import time

import numpy as np
import pytest

from dialogpomdp.model import (
    VectorSet, belief_entropy, belief_reward, belief_update, obs_likelihood, random_model,
    sample_simplex, value_of,
)
from dialogpomdp.policy import (
    DirectPolicyUnavailable, Policy, SimConfig, act_direct, act_lookahead,
    collect_sim_beliefs, evaluate_avg_value, lookahead_values, make_policy, simulate,
)
from dialogpomdp.solvers import GridConfig, SolverConfig, solve, solve_exact_vi, solve_qmdp


@pytest.fixture(scope="module")
def tiger_qmdp(tiger):
    return solve_qmdp(tiger, SolverConfig(residual_tolerance=1e-10)).vector_set


def _lookahead_by_hand(model, vs, b):
    """Straight transcription of the one-step look-ahead sum."""
    vals = []
    for a in range(model.n_actions):
        total = belief_reward(model, b, a)
        for o in range(model.n_observations):
            p = obs_likelihood(model, b, a, o)
            if p > 0:
                total += model.discount * p * value_of(vs, belief_update(model, b, a, o))[0]
        vals.append(total)
    return np.array(vals)


class TestDirect:
    def test_tiger_examples(self, tiger, tiger_qmdp):
        pol = make_policy("dr", tiger_qmdp)
        assert tiger.actions[act_direct(pol, [0.5, 0.5])] == "listen"
        assert tiger.actions[act_direct(pol, [0.0, 1.0])] == "open-left"

    def test_unlabeled_rejected(self, tiger):
        mdp = solve(tiger, "mdp").vector_set
        with pytest.raises(DirectPolicyUnavailable):
            make_policy("dr", mdp)

    def test_tie_goes_to_lowest_index(self):
        vs = VectorSet([[1.0, 0.0], [0.0, 1.0]], actions=[4, 2])
        assert act_direct(make_policy("direct", vs), [0.5, 0.5]) == 4

    def test_bad_mode(self, tiger_qmdp):
        with pytest.raises(ValueError):
            make_policy("sideways", tiger_qmdp)

    def test_lookahead_needs_model(self, tiger_qmdp):
        with pytest.raises(ValueError):
            Policy("lookahead", tiger_qmdp)


class TestLookahead:
    def test_zero_vector_is_myopic(self, tiger):
        pol = make_policy("la", VectorSet([[0.0, 0.0]]), tiger)
        assert tiger.actions[act_lookahead(pol, [0.5, 0.5])] == "listen"
        np.testing.assert_allclose(lookahead_values(pol, [0.5, 0.5]), [-1.0, -45.0, -45.0])

    def test_matches_hand_rolled_sum(self, tiger, tiger_qmdp):
        pol = make_policy("la", tiger_qmdp, tiger)
        b = np.array([0.85, 0.15])
        hand = _lookahead_by_hand(tiger, tiger_qmdp, b)
        np.testing.assert_allclose(lookahead_values(pol, b), hand, atol=1e-10)
        assert act_lookahead(pol, b) == int(np.argmax(hand))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_hand_rolled_sum_random(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 4, 3, 3, concentration=0.4)
        vs = VectorSet(rng.normal(size=(6, 4)), actions=rng.integers(0, 3, 6))
        pol = make_policy("la", vs, m)
        for b in sample_simplex(rng, 20, 4):
            np.testing.assert_allclose(lookahead_values(pol, b), _lookahead_by_hand(m, vs, b),
                                       atol=1e-10)

    def test_zero_probability_observations_skipped(self):
        m = random_model(np.random.default_rng(2), 3, 2, 3)
        Z = m.observation_fn.copy()
        Z[:, :, 2] = 0.0
        Z /= Z.sum(axis=2, keepdims=True)
        m2 = type(m)(m.states, m.actions, m.observations, m.transition, Z, m.reward,
                     m.discount, m.initial_belief)
        vs = VectorSet(np.random.default_rng(3).normal(size=(4, 3)))
        pol = make_policy("la", vs, m2)
        b = np.array([0.2, 0.3, 0.5])
        vals = lookahead_values(pol, b)
        assert np.all(np.isfinite(vals))
        np.testing.assert_allclose(vals, _lookahead_by_hand(m2, vs, b), atol=1e-10)

    def test_agrees_with_direct_at_corners(self, tiger):
        vs = solve_exact_vi(tiger, SolverConfig(max_epochs=15)).vector_set
        dr = make_policy("dr", vs)
        la = make_policy("la", vs, tiger)
        for b in np.eye(2):
            assert act_direct(dr, b) == act_lookahead(la, b)


def _constant(a):
    return lambda b: a


class TestSimulate:
    def test_constant_listen(self, tiger):
        rep = simulate(tiger, _constant(0), SimConfig(100, seed=1))
        assert rep.total_reward == -100.0
        assert sum(rep.observation_counts.values()) == 100

    def test_accounting(self, dialogue):
        vs = solve(dialogue, "qmdp").vector_set
        rep = simulate(dialogue, make_policy("dr", vs), SimConfig(2000, seed=4))
        assert sum(rep.reward_counts.values()) == 2000
        assert sum(rep.observation_counts.values()) == 2000
        assert sum(rep.action_counts.values()) == 2000
        assert rep.total_reward == sum(rep.reward_counts[c] * rep.reward_values[c]
                                       for c in rep.reward_counts)
        assert set(rep.observation_counts) == {"no-info", "yes-no", "partial", "full"}

    def test_determinism(self, dialogue):
        vs = solve(dialogue, "fib").vector_set
        pol = make_policy("la", vs, dialogue)
        a = simulate(dialogue, pol, SimConfig(500, seed=9, keep_trace=True))
        b = simulate(dialogue, pol, SimConfig(500, seed=9, keep_trace=True))
        assert a.same_outcome(b)
        c = simulate(dialogue, pol, SimConfig(500, seed=10, keep_trace=True))
        assert not a.same_outcome(c)

    def test_trace_validity(self, dialogue):
        vs = solve(dialogue, "qmdp").vector_set
        trace = collect_sim_beliefs(dialogue, make_policy("la", vs, dialogue), SimConfig(300, 2))
        assert trace.shape == (300, 40)
        assert np.all(trace >= 0)
        np.testing.assert_allclose(trace.sum(axis=1), 1.0, atol=1e-9)

    def test_trace_determinism(self, tiger):
        a = collect_sim_beliefs(tiger, _constant(0), SimConfig(50, 5))
        b = collect_sim_beliefs(tiger, _constant(0), SimConfig(50, 5))
        assert np.array_equal(a, b) and a.shape == (50, 2)

    def test_listening_sharpens_beliefs(self, tiger):
        trace = collect_sim_beliefs(tiger, _constant(0), SimConfig(400, 3))
        h = np.array([belief_entropy(b) for b in trace])
        assert np.median(h[200:]) < np.median(h[:20])

    def test_dimension_mismatch(self, tiger):
        with pytest.raises(ValueError):
            simulate(tiger, make_policy("dr", VectorSet([[0.0, 0.0, 0.0]], actions=[0])))

    def test_initial_belief_override(self, tiger):
        rep = simulate(tiger, _constant(1), SimConfig(1, seed=0, initial_belief=[0.0, 1.0]))
        assert rep.total_reward == 10.0

    def test_steps_validated(self):
        with pytest.raises(ValueError):
            SimConfig(0)

    def test_grid_beats_mdp_on_dialogue(self, dialogue):
        grid = solve(dialogue, "grid", SolverConfig(max_epochs=30), GridConfig("random", 64))
        mdp = solve(dialogue, "mdp")
        cfg = SimConfig(3000, seed=0)
        g = simulate(dialogue, make_policy("la", grid.vector_set, dialogue), cfg).total_reward
        m = simulate(dialogue, make_policy("la", mdp.vector_set, dialogue), cfg).total_reward
        assert g > m


class TestAverageValue:
    def test_zero_vector(self):
        assert evaluate_avg_value(VectorSet([[0.0, 0.0, 0.0]]), 100, 1) == 0.0

    def test_single_vector_mean(self):
        alpha = np.array([3.0, -1.0, 7.0, 2.0])
        pts = 10_000
        est = evaluate_avg_value(VectorSet([alpha]), pts, 0)
        # b.alpha under the flat Dirichlet has mean sum(alpha)/n and variance from Dir(1)
        n = alpha.size
        mean = alpha.sum() / n
        var = ((alpha - mean) ** 2).sum() / (n * (n + 1))
        assert abs(est - mean) <= 3 * np.sqrt(var / pts)

    def test_monotone_in_inclusion(self):
        rng = np.random.default_rng(0)
        big = rng.normal(size=(10, 5))
        assert evaluate_avg_value(VectorSet(big[:4]), 500, 3) <= evaluate_avg_value(
            VectorSet(big), 500, 3)

    def test_points_validated(self):
        with pytest.raises(ValueError):
            evaluate_avg_value(VectorSet([[0.0]]), 0)


def test_decision_latency_direct_faster(dialogue):
    vs = solve(dialogue, "qmdp").vector_set
    beliefs = sample_simplex(np.random.default_rng(0), 300, 40)
    dr, la = make_policy("dr", vs), make_policy("la", vs, dialogue)
    t0 = time.perf_counter()
    for b in beliefs:
        dr(b)
    t1 = time.perf_counter()
    for b in beliefs:
        la(b)
    t2 = time.perf_counter()
    assert t1 - t0 < t2 - t1
