# gtn/envs/policies.py

"""Scripted policies embodying each knowledge tier, plus random baselines."""

import logging
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Dict, Optional

import numpy as np

from gtn.core.definitions import Action, Cell, Tier
from gtn.envs.shooter import EnvState, TaskSpec, env_reset, env_step

logger = logging.getLogger(__name__)


class ScriptedPolicy(ABC):
    """Base class for hand-written shooter strategies."""

    tier: int = 0

    @abstractmethod
    def act(self, spec: TaskSpec, state: EnvState) -> int:
        """Chooses an action for the current state.

        Args:
            spec: Task being played
            state: Current episode state

        Returns:
            Action index in [0, spec.action_count)
        """
        pass


class ShootContinuously(ScriptedPolicy):
    """Knowledge I: shoot every step."""

    tier = Tier.SHOOT

    def act(self, spec: TaskSpec, state: EnvState) -> int:
        return Action.SHOOT


class AimThenShoot(ScriptedPolicy):
    """Knowledge II: walk to the nearest target column, shoot when aligned."""

    tier = Tier.AIM
    wanted = (Cell.GOOD, Cell.BAD)

    def act(self, spec: TaskSpec, state: EnvState) -> int:
        occupied = np.isin(state.targets, self.wanted).any(axis=0)
        columns = np.flatnonzero(occupied)
        if columns.size == 0:
            return Action.NOOP
        # argmin returns the leftmost of equally near columns
        target = int(columns[np.argmin(np.abs(columns - state.agent))])
        if target == state.agent:
            return Action.SHOOT
        if spec.action_count <= Action.RIGHT:
            return Action.NOOP
        return Action.RIGHT if target > state.agent else Action.LEFT


class AimValidThenShoot(AimThenShoot):
    """Knowledge III: like knowledge II, but only good targets count."""

    tier = Tier.AIM_VALID
    wanted = (Cell.GOOD,)


_oracle_cache: Dict[int, ScriptedPolicy] = {}


def get_oracle(tier: int) -> ScriptedPolicy:
    """Factory returning the shared scripted policy of a tier.

    Raises:
        ValueError: If the tier is unknown.
    """
    if tier in _oracle_cache:
        return _oracle_cache[tier]

    lookup = {
        Tier.SHOOT: ShootContinuously,
        Tier.AIM: AimThenShoot,
        Tier.AIM_VALID: AimValidThenShoot,
    }
    policy_class = lookup.get(tier)
    if policy_class is None:
        raise ValueError(f"No scripted policy for tier {tier}")
    _oracle_cache[tier] = policy_class()
    return _oracle_cache[tier]


def oracle_policy(spec: TaskSpec, state: EnvState, tier: Optional[int] = None) -> int:
    """Action of the scripted policy for `tier` (default: the task's own tier)."""
    return get_oracle(spec.tier if tier is None else tier).act(spec, state)


def play_episode(spec: TaskSpec, seed: int, choose) -> float:
    """Plays one episode with `choose(state) -> action`; returns the raw score."""
    state, _ = env_reset(spec, seed)
    while not state.done:
        env_step(state, choose(state))
    return state.score


def scripted_mean_score(
    spec: TaskSpec, tier: int, episodes: int, seed: int
) -> float:
    """Mean episode score of the tier's scripted policy on `spec`."""
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=episodes)
    policy = get_oracle(tier)
    scores = [play_episode(spec, int(s), lambda st: policy.act(spec, st)) for s in seeds]
    return float(np.mean(scores))


@lru_cache(maxsize=256)
def random_baseline_score(spec: TaskSpec, episodes: int, seed: int) -> float:
    """Mean undiscounted score of uniformly random actions.

    Results are memoized per (spec, episodes, seed).

    Raises:
        ValueError: If episodes < 1.
    """
    if episodes < 1:
        raise ValueError("random_baseline_score needs at least one episode")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=episodes)
    scores = [
        play_episode(spec, int(s), lambda _: int(rng.integers(spec.action_count)))
        for s in seeds
    ]
    mean = float(np.mean(scores))
    logger.debug(
        "Random baseline computed",
        extra={"tier": spec.tier, "episodes": episodes, "seed": seed, "mean": mean},
    )
    return mean
