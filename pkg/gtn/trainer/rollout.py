# gtn/trainer/rollout.py

"""Experience collection and the accumulated actor-critic gradients."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gtn.core.domain import RolloutBuffer, RolloutStep
from gtn.core.exceptions import UsageError
from gtn.engine.layers import log_softmax, softmax
from gtn.engine.tape import Tape, backward
from gtn.engine.tensor import ParameterSet
from gtn.envs.shooter import ShooterEnv
from gtn.model.network import GtnNetwork, StepNodes, gtn_forward, record_step, state_leaves
from gtn.trainer.returns import discounted_returns, normalize_reward, sample_action

logger = logging.getLogger(__name__)


def check_compatible(net: GtnNetwork, env: ShooterEnv) -> None:
    """Raises UsageError unless `net` can observe and act in `env`."""
    spec = env.spec
    if spec.render_side != net.config.input_side:
        raise UsageError(
            f"Task renders {spec.render_side}x{spec.render_side}, "
            f"network expects {net.config.input_side}"
        )
    if spec.action_count not in net.config.action_space_sizes:
        raise UsageError(
            f"No policy head for {spec.action_count} actions "
            f"(heads: {net.config.action_space_sizes})"
        )


def collect_rollout(
    net: GtnNetwork,
    env: ShooterEnv,
    t_max: int,
    rng: np.random.Generator,
    epsilon: float = 0.0,
) -> RolloutBuffer:
    """Plays up to `t_max` steps with the local network.

    Starts a new episode (and clears the recurrent state) when the
    environment has none running. Rewards are normalized through the
    environment's recorded maximum before they are stored.

    Args:
        net: Local network; its recurrent state is advanced in place
        env: Environment handle owned by the calling worker
        t_max: Maximum rollout length
        rng: Action sampling generator
        epsilon: Probability of a uniform random action

    Returns:
        RolloutBuffer; bootstrap_value is V of the next state on cutoff
        and 0 on episode end.
    """
    check_compatible(net, env)
    if env.state is None or env.state.done:
        env.reset()
        net.reset_recurrent()

    count = env.spec.action_count
    buffer = RolloutBuffer(action_count=count)
    for _ in range(t_max):
        f_prev = [s.copy() for s in net.recurrent]
        observation = env.observation
        result = gtn_forward(net, observation, f_prev)
        action = sample_action(result.policies[count], rng, epsilon=epsilon)

        step = env.step(action)
        reward, env.state.recorded_max_step_reward = normalize_reward(
            env.state.episode_index, step.reward, env.state.recorded_max_step_reward
        )
        buffer.steps.append(
            RolloutStep(
                observation=observation,
                f_prev=f_prev,
                action=action,
                reward=reward,
                raw_reward=step.reward,
            )
        )
        net.recurrent = result.new_recurrent
        if step.done:
            buffer.terminal = True
            break

    if not buffer.terminal:
        buffer.bootstrap_value = gtn_forward(net, env.observation, net.recurrent).value
    return buffer


@dataclass
class RolloutLoss:
    """Scalar parts of the objective of one rollout."""

    policy: float
    value: float
    entropy: float

    @property
    def total(self) -> float:
        return self.policy + self.value


def _replay(net: GtnNetwork, buffer: RolloutBuffer) -> Tuple[Tape, List[StepNodes]]:
    """Re-records the rollout on a tape, starting from the first stored state."""
    if not buffer.steps:
        raise UsageError("Cannot compute gradients of an empty rollout")
    tape = Tape(net.params)
    states = state_leaves(tape, buffer.steps[0].f_prev)
    recorded: List[StepNodes] = []
    for step in buffer.steps:
        nodes = record_step(net, tape, np.asarray(step.observation, dtype=np.float64), states)
        recorded.append(nodes)
        states = nodes.level_states
    return tape, recorded


def rollout_objective(
    net: GtnNetwork,
    buffer: RolloutBuffer,
    beta: float,
    gamma: float,
    frozen_values: Optional[Sequence[float]] = None,
) -> Tuple[RolloutLoss, List[float]]:
    """Evaluates sum_t [-log pi(a_t) (R_t - V_t') - beta H_t + (R_t - V_t)^2].

    V_t' in the advantage is `frozen_values[t]` when given, otherwise the
    current V_t. Used for logging and as the finite-difference objective.

    Returns:
        (loss parts, V_t of every step)
    """
    tape, recorded = _replay(net, buffer)
    values = [float(tape.value(n.value)[0]) for n in recorded]
    baseline = values if frozen_values is None else list(frozen_values)
    returns = discounted_returns(buffer.rewards, buffer.bootstrap_value, gamma)

    loss = RolloutLoss(policy=0.0, value=0.0, entropy=0.0)
    for t, (nodes, step) in enumerate(zip(recorded, buffer.steps)):
        logp = log_softmax(tape.value(nodes.logits[buffer.action_count]))
        entropy = -float(np.sum(np.exp(logp) * logp))
        advantage = returns[t] - baseline[t]
        loss.policy += -logp[step.action] * advantage - beta * entropy
        loss.value += (returns[t] - values[t]) ** 2
        loss.entropy += entropy
    return loss, values


def accumulate_gradients(
    buffer: RolloutBuffer, net: GtnNetwork, beta: float, gamma: float = 0.99
) -> ParameterSet:
    """Adds the rollout's actor-critic gradients into `net.params` slots.

    The policy term is grad[-log pi(a_t) A_t - beta H(pi_t)] with the
    advantage A_t = R_t - V_t held constant; the value term is
    grad (R_t - V_t)^2. Both are backpropagated through time across the
    whole buffer. Slots are not zeroed here.

    Args:
        buffer: Experiences of one rollout
        net: Local network the rollout was collected with
        beta: Entropy bonus coefficient
        gamma: Discount factor

    Returns:
        The network's ParameterSet, whose gradient slots hold the sums.
    """
    tape, recorded = _replay(net, buffer)
    returns = discounted_returns(buffer.rewards, buffer.bootstrap_value, gamma)

    seeds = {}
    for t, (nodes, step) in enumerate(zip(recorded, buffer.steps)):
        value = float(tape.value(nodes.value)[0])
        advantage = returns[t] - value
        logits = tape.value(nodes.logits[buffer.action_count])
        p = softmax(logits)
        logp = log_softmax(logits)
        entropy = -float(np.sum(p * logp))

        # d/dz of -log p_a * A is A * (p - e_a); of -beta * H is beta * p * (log p + H)
        d_logits = advantage * p
        d_logits[step.action] -= advantage
        d_logits += beta * p * (logp + entropy)

        seeds[nodes.logits[buffer.action_count]] = d_logits
        seeds[nodes.value] = np.array([2.0 * (value - returns[t])])

    backward(tape, seeds)
    logger.debug(
        "Gradients accumulated",
        extra={"steps": len(buffer), "terminal": buffer.terminal},
    )
    return net.params
