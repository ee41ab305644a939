# gtn/envs/shooter.py

"""Deterministic toy shooters encoding three tiers of shared knowledge.

The agent moves along the bottom row of a grid and shoots straight up.
Targets spawn in waves in the upper half, at most one per column.

* Tier 1: dense formation that marches one column right per step, so
  shooting continuously scores.
* Tier 2: sparse static targets, all valid; the agent must aim.
* Tier 3: static targets, some bad; the agent must aim at valid ones.

A wave ends when no good target remains; the episode ends after the last
wave or at the step cap.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gtn.core.definitions import Action, Cell, Gray, Tier
from gtn.core.domain import StepResult
from gtn.core.exceptions import UsageError

logger = logging.getLogger(__name__)


class TaskSpec(BaseModel):
    """Static description of one shooter task."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    tier: int = Field(default=Tier.SHOOT, ge=1, le=3)
    width: int = Field(default=12, ge=2)
    height: int = Field(default=12, ge=4)
    target_density: float = Field(default=1.0, gt=0.0, le=1.0)
    bad_target_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    penalty: float = Field(default=-1.0, le=0.0)
    episode_cap: int = Field(default=400, ge=1)
    waves: int = Field(default=8, ge=1)
    action_count: int = Field(default=4, ge=Action.MIN_COUNT, le=Action.MAX_COUNT)
    render_side: int = Field(default=42, ge=1)

    @model_validator(mode="after")
    def validate_tier(self) -> "TaskSpec":
        if self.tier == Tier.SHOOT:
            if self.bad_target_fraction != 0.0:
                raise ValueError("tier 1 tasks cannot have bad targets")
            if self.target_density < 0.8:
                raise ValueError(
                    f"tier 1 needs target_density >= 0.8 so blind shooting scores, "
                    f"got {self.target_density}"
                )
        if self.tier == Tier.AIM and self.bad_target_fraction != 0.0:
            raise ValueError("tier 2 tasks only have valid targets")
        if self.tier != Tier.SHOOT and self.action_count <= Action.RIGHT:
            raise ValueError(
                f"tier {self.tier} needs left and right moves (action_count >= 4), "
                f"got {self.action_count}"
            )
        return self

    @property
    def marching(self) -> bool:
        return self.tier == Tier.SHOOT

    @property
    def targets_per_wave(self) -> int:
        return max(1, int(round(self.target_density * self.width)))


@dataclass
class EnvState:
    """Mutable state of one running episode.

    Attributes:
        agent: Agent column
        targets: [height, width] grid of Cell codes
        wave: Index of the current wave
        step: Steps taken in this episode
        rng: Generator driving spawns
        episode_index: 1-based episode counter of the owning environment
        recorded_max_step_reward: Largest |reward| seen during episodes 1-2
        score: Undiscounted raw score of the episode so far
        done: Whether the episode has ended
    """

    agent: int
    targets: np.ndarray
    wave: int
    step: int
    rng: np.random.Generator
    episode_index: int = 1
    recorded_max_step_reward: float = 0.0
    score: float = 0.0
    done: bool = False
    spec: Optional[TaskSpec] = None


@lru_cache(maxsize=64)
def _pixel_index(side: int, cells: int) -> np.ndarray:
    return (np.arange(side) * cells) // side


def render(spec: TaskSpec, state: EnvState) -> np.ndarray:
    """Grayscale observation [1, side, side] with values in [0, 1]."""
    grid = np.full((spec.height, spec.width), Gray.BACKGROUND)
    grid[state.targets == Cell.GOOD] = Gray.GOOD_TARGET
    grid[state.targets == Cell.BAD] = Gray.BAD_TARGET
    grid[spec.height - 1, state.agent] = Gray.AGENT
    rows = _pixel_index(spec.render_side, spec.height)
    cols = _pixel_index(spec.render_side, spec.width)
    return grid[np.ix_(rows, cols)][None, :, :]


def _spawn_wave(spec: TaskSpec, state: EnvState) -> None:
    state.targets.fill(Cell.EMPTY)
    columns = state.rng.choice(spec.width, size=spec.targets_per_wave, replace=False)
    rows = state.rng.integers(0, spec.height // 2, size=columns.size)
    bad = state.rng.random(columns.size) < spec.bad_target_fraction
    for col, row, is_bad in zip(columns, rows, bad):
        state.targets[row, col] = Cell.BAD if is_bad else Cell.GOOD


def env_reset(
    spec: TaskSpec, seed: int, episode_index: int = 1, recorded_max: float = 0.0
) -> Tuple[EnvState, np.ndarray]:
    """Starts an episode with a layout fully determined by `seed`.

    Returns:
        (state, observation)
    """
    state = EnvState(
        agent=spec.width // 2,
        targets=np.zeros((spec.height, spec.width), dtype=np.int8),
        wave=0,
        step=0,
        rng=np.random.default_rng(seed),
        episode_index=episode_index,
        recorded_max_step_reward=recorded_max,
        spec=spec,
    )
    _spawn_wave(spec, state)
    return state, render(spec, state)


def env_step(state: EnvState, action: int) -> StepResult:
    """Advances the episode by one action (mutates `state`).

    Raises:
        UsageError: If the action is out of range or the episode is over.
    """
    spec = state.spec
    if not 0 <= action < spec.action_count:
        raise UsageError(f"Action {action} outside [0, {spec.action_count})")
    if state.done:
        raise UsageError("env_step called on a finished episode")

    reward = 0.0
    if action == Action.SHOOT:
        column = state.targets[:, state.agent]
        hit = np.flatnonzero(column != Cell.EMPTY)
        if hit.size:
            # lowest target in the column takes the shot
            row = hit[-1]
            reward = 1.0 if column[row] == Cell.GOOD else spec.penalty
            column[row] = Cell.EMPTY
    elif action == Action.LEFT:
        state.agent = max(0, state.agent - 1)
    elif action == Action.RIGHT:
        state.agent = min(spec.width - 1, state.agent + 1)

    if spec.marching:
        state.targets = np.roll(state.targets, 1, axis=1)

    state.step += 1
    state.score += reward

    if not np.any(state.targets == Cell.GOOD):
        state.wave += 1
        if state.wave >= spec.waves:
            state.done = True
        else:
            _spawn_wave(spec, state)
    if state.step >= spec.episode_cap:
        state.done = True

    return StepResult(observation=render(spec, state), reward=reward, done=state.done)


class ShooterEnv:
    """Environment handle that persists across episodes.

    Carries the episode counter and the recorded maximal step reward used
    for reward normalization, and derives each episode's seed from one
    base seed.
    """

    def __init__(self, spec: TaskSpec, seed: int, name: str = "") -> None:
        self.spec = spec
        self.name = name
        self._seeds = np.random.default_rng(seed)
        self.state: Optional[EnvState] = None
        self.observation: Optional[np.ndarray] = None
        self.episode_index = 0
        self.recorded_max = 0.0

    def reset(self) -> np.ndarray:
        if self.state is not None:
            self.recorded_max = self.state.recorded_max_step_reward
        self.episode_index += 1
        self.state, self.observation = env_reset(
            self.spec,
            int(self._seeds.integers(0, 2**31 - 1)),
            episode_index=self.episode_index,
            recorded_max=self.recorded_max,
        )
        return self.observation

    def step(self, action: int) -> StepResult:
        if self.state is None:
            raise UsageError("ShooterEnv.step called before reset")
        result = env_step(self.state, action)
        self.observation = result.observation
        return result

    @property
    def episode_score(self) -> float:
        return 0.0 if self.state is None else self.state.score

    def __repr__(self) -> str:
        return f"<ShooterEnv {self.name or 'task'} tier={self.spec.tier} episode={self.episode_index}>"
