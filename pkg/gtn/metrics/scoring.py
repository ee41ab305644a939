# gtn/metrics/scoring.py

"""Episode scoring harness and the relative final score."""

import logging
from typing import List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from gtn.core.domain import ScoreSample
from gtn.core.exceptions import UndefinedMetricError, UsageError
from gtn.envs.policies import oracle_policy, random_baseline_score
from gtn.envs.shooter import EnvState, TaskSpec, env_reset, env_step
from gtn.model.network import GtnNetwork, gtn_forward
from gtn.trainer.returns import sample_action

logger = logging.getLogger(__name__)

RFS_EPSILON = 1e-9


class Agent(Protocol):
    """Anything that can play shooter episodes."""

    def reset(self) -> None: ...

    def act(
        self, spec: TaskSpec, state: EnvState, observation: np.ndarray, rng: np.random.Generator
    ) -> int: ...


class NetworkAgent:
    """Plays with a GTN; recurrent state is cleared at every episode start."""

    def __init__(self, net: GtnNetwork, greedy: bool = True) -> None:
        self.net = net
        self.greedy = greedy

    def reset(self) -> None:
        self.net.reset_recurrent()

    def act(self, spec, state, observation, rng) -> int:
        result = gtn_forward(self.net, observation)
        self.net.recurrent = result.new_recurrent
        return sample_action(result.policies[spec.action_count], rng, greedy=self.greedy)


class OracleAgent:
    """Scripted knowledge-tier policy; `tier=None` uses each task's own tier."""

    def __init__(self, tier: Optional[int] = None) -> None:
        self.tier = tier

    def reset(self) -> None:
        pass

    def act(self, spec, state, observation, rng) -> int:
        return oracle_policy(spec, state, self.tier)


class UniformAgent:
    """Uniformly random actions."""

    def reset(self) -> None:
        pass

    def act(self, spec, state, observation, rng) -> int:
        return int(rng.integers(spec.action_count))


def check_covers(net: GtnNetwork, spec: TaskSpec) -> None:
    """Raises UsageError unless `net` has a head and input side for `spec`."""
    if spec.action_count not in net.config.action_space_sizes:
        raise UsageError(
            f"Network has no policy head for {spec.action_count} actions "
            f"(heads: {net.config.action_space_sizes})"
        )
    if spec.render_side != net.config.input_side:
        raise UsageError(
            f"Network input side {net.config.input_side} != task render side {spec.render_side}"
        )


def play_episodes(agent: Agent, spec: TaskSpec, episodes: int, seed: int) -> List[float]:
    """Raw undiscounted scores of `episodes` full episodes.

    Episode layouts and action sampling draw from independent streams of
    `seed`, so the same seed replays the same layouts for any agent.
    """
    layout_seq, action_seq = np.random.SeedSequence(seed).spawn(2)
    layouts = np.random.default_rng(layout_seq).integers(0, 2**31 - 1, size=episodes)
    rng = np.random.default_rng(action_seq)
    scores: List[float] = []
    for layout in layouts:
        state, observation = env_reset(spec, int(layout))
        agent.reset()
        while not state.done:
            action = agent.act(spec, state, observation, rng)
            observation = env_step(state, action).observation
        scores.append(state.score)
    return scores


def episode_score(
    agent: Union[Agent, GtnNetwork],
    spec: TaskSpec,
    episodes: int,
    greedy: bool = True,
    seed: int = 0,
    task_id: str = "",
    baseline_episodes: Optional[int] = None,
) -> ScoreSample:
    """Scores an agent on one task and subtracts the random-action baseline.

    Args:
        agent: An Agent, or a GtnNetwork wrapped into a NetworkAgent
        spec: Task to play
        episodes: Number of full episodes
        greedy: Argmax actions for networks; sampled otherwise
        seed: Evaluation seed
        task_id: Name recorded in the sample
        baseline_episodes: Episodes of the random baseline (default: `episodes`)

    Returns:
        ScoreSample with raw and baseline-adjusted means

    Raises:
        UsageError: If episodes < 1 or the network cannot play the task.
    """
    if episodes < 1:
        raise UsageError("episode_score needs at least one episode")
    if isinstance(agent, GtnNetwork):
        check_covers(agent, spec)
        agent = NetworkAgent(agent, greedy=greedy)

    scores = np.asarray(play_episodes(agent, spec, episodes, seed))
    baseline = random_baseline_score(spec, baseline_episodes or episodes, seed)
    sample = ScoreSample(
        task_id=task_id,
        episodes=episodes,
        mean_raw=float(scores.mean()),
        mean_adjusted=float(scores.mean()) - baseline,
        greedy=greedy,
        seed=seed,
        baseline=baseline,
        std_raw=float(scores.std(ddof=1)) if episodes > 1 else 0.0,
    )
    logger.debug(
        "Task scored",
        extra={
            "task": task_id,
            "episodes": episodes,
            "mean_raw": sample.mean_raw,
            "mean_adjusted": sample.mean_adjusted,
        },
    )
    return sample


def rfs(multi_score: float, single_score: float) -> float:
    """Relative final score multi / single on baseline-adjusted scores.

    Raises:
        UndefinedMetricError: If |single_score| < 1e-9.
    """
    if abs(single_score) < RFS_EPSILON:
        raise UndefinedMetricError(
            f"RFS undefined: single-task score {single_score} is zero (task unlearned)"
        )
    return multi_score / single_score


def mean_rfs(pairs: Sequence[Tuple[float, float]]) -> Tuple[Optional[float], int]:
    """Averages RFS over (multi, single) pairs, skipping undefined ones.

    Returns:
        (mean RFS or None when nothing is defined, number of excluded pairs)
    """
    values: List[float] = []
    excluded = 0
    for multi, single in pairs:
        try:
            values.append(rfs(multi, single))
        except UndefinedMetricError:
            excluded += 1
    if excluded:
        logger.warning("Undefined RFS excluded from the average", extra={"excluded": excluded})
    return (float(np.mean(values)) if values else None), excluded
