# gtn/trainer/returns.py

"""Discounted returns, reward normalization and action sampling."""

from typing import List, Sequence, Tuple

import numpy as np


def discounted_returns(
    rewards: Sequence[float], bootstrap: float, gamma: float
) -> List[float]:
    """R_t = r_t + gamma * R_(t+1), seeded with the bootstrap value.

    Equivalent to sum_i gamma^(i-t) r_i + gamma^(T-t+1) * bootstrap.

    Raises:
        ValueError: If gamma is outside (0, 1].
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    running = float(bootstrap)
    out = [0.0] * len(rewards)
    for t in range(len(rewards) - 1, -1, -1):
        running = float(rewards[t]) + gamma * running
        out[t] = running
    return out


def normalize_reward(
    episode_index: int, reward: float, recorded_max: float
) -> Tuple[float, float]:
    """Reward scaling by the maximal step reward of the first two episodes.

    During episodes 1-2 the raw reward passes through and the record is
    updated; afterwards the record is frozen and used as the divisor
    (1.0 when nothing nonzero was seen).

    Returns:
        (normalized reward, updated recorded maximum)
    """
    if episode_index <= 2:
        return reward, max(recorded_max, abs(reward))
    scale = recorded_max if recorded_max > 0 else 1.0
    return reward / scale, recorded_max


def sample_action(
    policy: np.ndarray,
    rng: np.random.Generator,
    greedy: bool = False,
    epsilon: float = 0.0,
) -> int:
    """Draws an action from a probability vector.

    Args:
        policy: Probabilities summing to 1
        rng: Random generator
        greedy: Take the argmax (lowest index on ties) instead of sampling
        epsilon: Probability of a uniform random action when sampling

    Returns:
        Action index
    """
    if greedy:
        return int(np.argmax(policy))
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(policy)))
    cumulative = np.cumsum(policy)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, len(policy) - 1)
