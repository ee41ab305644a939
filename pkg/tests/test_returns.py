# tests/test_returns.py

import numpy as np
import pytest

from gtn.trainer.returns import discounted_returns, normalize_reward, sample_action


def test_discounted_returns_example():
    returns = discounted_returns([1.0, 0.0, 2.0], bootstrap=0.0, gamma=0.99)
    assert returns[0] == pytest.approx(1 + 0.99**2 * 2, abs=1e-12)
    assert returns[0] == pytest.approx(2.9602, abs=1e-12)
    assert returns[1] == pytest.approx(1.98, abs=1e-12)
    assert returns[2] == pytest.approx(2.0, abs=1e-12)


def test_undiscounted_returns_are_suffix_sums():
    rewards = [1.0, -1.0, 0.0, 3.0]
    assert discounted_returns(rewards, 0.0, 1.0) == pytest.approx([3.0, 2.0, 3.0, 3.0])


def test_bootstrap_only():
    assert discounted_returns([0.0, 0.0], bootstrap=5.0, gamma=0.5) == pytest.approx([1.25, 2.5])
    assert discounted_returns([], bootstrap=5.0, gamma=0.5) == []


def test_recursion_matches_closed_form_on_random_rollouts():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        length = int(rng.integers(1, 51))
        rewards = rng.normal(size=length)
        bootstrap = float(rng.normal())
        gamma = float(rng.choice([0.9, 0.99, 1.0]))
        got = discounted_returns(rewards.tolist(), bootstrap, gamma)
        for t in range(length):
            powers = gamma ** np.arange(length - t)
            expected = float(np.sum(powers * rewards[t:])) + gamma ** (length - t) * bootstrap
            assert got[t] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.0, -0.1, 1.5])
def test_gamma_out_of_range(gamma):
    with pytest.raises(ValueError):
        discounted_returns([1.0], 0.0, gamma)


def test_normalize_reward_records_during_first_two_episodes():
    assert normalize_reward(1, 2.0, 0.0) == (2.0, 2.0)
    assert normalize_reward(2, -3.0, 2.0) == (-3.0, 3.0)
    assert normalize_reward(2, 1.0, 3.0) == (1.0, 3.0)


def test_normalize_reward_divides_afterwards():
    value, record = normalize_reward(3, 1.5, 3.0)
    assert value == 0.5
    assert record == 3.0
    # record frozen even for larger rewards
    assert normalize_reward(5, 6.0, 3.0) == (2.0, 3.0)


def test_normalize_reward_without_a_record_passes_through():
    assert normalize_reward(3, 1.0, 0.0) == (1.0, 0.0)


def test_greedy_takes_the_lowest_argmax():
    rng = np.random.default_rng(0)
    assert sample_action(np.array([0.2, 0.4, 0.4]), rng, greedy=True) == 1


def test_sampling_follows_the_policy():
    rng = np.random.default_rng(0)
    draws = [sample_action(np.array([0.5, 0.5]), rng) for _ in range(10000)]
    assert np.mean(draws) == pytest.approx(0.5, abs=0.02)


def test_sampling_never_picks_zero_probability_actions():
    rng = np.random.default_rng(1)
    policy = np.array([0.0, 1.0, 0.0])
    assert {sample_action(policy, rng) for _ in range(200)} == {1}


def test_epsilon_one_is_uniform():
    rng = np.random.default_rng(2)
    draws = [sample_action(np.array([1.0, 0.0, 0.0, 0.0]), rng, epsilon=1.0) for _ in range(4000)]
    counts = np.bincount(draws, minlength=4) / 4000
    np.testing.assert_allclose(counts, 0.25, atol=0.03)


def test_sampling_is_reproducible():
    policy = np.array([0.1, 0.2, 0.3, 0.4])
    a = [sample_action(policy, np.random.default_rng(9)) for _ in range(3)]
    b = [sample_action(policy, np.random.default_rng(9)) for _ in range(3)]
    assert a == b
