# gtn/model/network.py

"""Generalization Tower Network topology, forward pass and parameter plumbing.

Level 1 convolves the observation. Every level m >= 2 starts from the
feature map of the first convolution of level m-1 (the vertical stream),
runs its own convolutions, flattens, and feeds an LSTM. The LSTM outputs
a_1..a_M are merged by H = ReLU(sum_m a_m T_m + bias), and H feeds one
softmax policy head per action-space size and a scalar value head.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gtn.core.domain import ForwardResult, LstmState
from gtn.core.exceptions import ConfigurationError, UsageError
from gtn.engine.layers import conv_output_side
from gtn.engine.tape import Tape
from gtn.engine.tensor import ParameterSet
from gtn.model.config import GtnConfig

logger = logging.getLogger(__name__)


@dataclass
class LevelPlan:
    """Spatial bookkeeping of one horizontal stream.

    Attributes:
        level: 1-indexed level
        input_side: Side of the map entering C_(m,1)
        conv_sides: Output side after each conv of the level
        flatten_width: Length of the LSTM input
    """

    level: int
    input_side: int
    conv_sides: List[int]
    flatten_width: int


def plan_levels(config: GtnConfig) -> List[LevelPlan]:
    """Computes the shape chain of every level.

    Level 1 reads the observation; level m+1 reads the output of level m's
    first conv, so each level starts at half the side of the one below
    (42, 21, 11, 6 for the default 42x42 input).

    Raises:
        ConfigurationError: If a conv chain leaves a side below 1.
    """
    plans: List[LevelPlan] = []
    side_in = config.input_side
    for m in range(1, config.levels + 1):
        sides: List[int] = []
        side = side_in
        for n in range(1, config.layers_at(m) + 1):
            side = conv_output_side(side, config.stride)
            if side < 1:
                raise ConfigurationError(
                    f"Spatial collapse at level {m}, conv layer {n}: side {side}"
                )
            sides.append(side)
        plans.append(
            LevelPlan(
                level=m,
                input_side=side_in,
                conv_sides=sides,
                flatten_width=config.channels * sides[-1] * sides[-1],
            )
        )
        # the next level taps this level's first conv
        side_in = sides[0]
    return plans


def conv_name(level: int, layer: int, kind: str) -> str:
    return f"conv.{level}.{layer}.{kind}"


def lstm_name(level: int, kind: str) -> str:
    return f"lstm.{level}.{kind}"


def tower_name(level: int) -> str:
    return f"concat.T{level}"


def policy_name(size: int, kind: str) -> str:
    return f"policy.{size}.{kind}"


def parameter_layout(config: GtnConfig) -> Dict[str, Tuple[Tuple[int, ...], int]]:
    """Ordered map name -> (shape, fan_in) of every parameter the topology implies."""
    layout: Dict[str, Tuple[Tuple[int, ...], int]] = {}
    k, c, s, a = config.kernel, config.channels, config.lstm_size, config.concat_size
    for plan in plan_levels(config):
        m = plan.level
        for n in range(1, len(plan.conv_sides) + 1):
            c_in = 1 if (m == 1 and n == 1) else c
            layout[conv_name(m, n, "weight")] = ((c, c_in, k, k), c_in * k * k)
            layout[conv_name(m, n, "bias")] = ((c,), 0)
        layout[lstm_name(m, "w_x")] = ((plan.flatten_width, 4 * s), plan.flatten_width)
        layout[lstm_name(m, "w_h")] = ((s, 4 * s), s)
        layout[lstm_name(m, "bias")] = ((4 * s,), 0)
    for m in range(1, config.levels + 1):
        layout[tower_name(m)] = ((s, a), s)
    layout["concat.bias"] = ((a,), 0)
    for size in config.action_space_sizes:
        layout[policy_name(size, "weight")] = ((a, size), a)
        layout[policy_name(size, "bias")] = ((size,), 0)
    layout["value.weight"] = ((a, 1), a)
    layout["value.bias"] = ((1,), 0)
    return layout


def audit_parameter_names(config: GtnConfig) -> List[str]:
    """Names the topology implies, in canonical order."""
    return list(parameter_layout(config))


class GtnNetwork:
    """Parameters, recurrent slots and noise hooks of one GTN instance.

    Instances are single-threaded; use one per worker.
    """

    def __init__(self, config: GtnConfig, params: ParameterSet) -> None:
        self.config = config
        self.params = params
        self.plans = plan_levels(config)
        self.recurrent: List[LstmState] = self.initial_recurrent()
        self._noise: Dict[int, object] = {}

    def initial_recurrent(self) -> List[LstmState]:
        return [LstmState.zeros(self.config.lstm_size) for _ in range(self.config.levels)]

    def reset_recurrent(self) -> None:
        self.recurrent = self.initial_recurrent()

    def noisy_levels(self) -> List[int]:
        return sorted(self._noise)

    def audit(self) -> List[str]:
        """Returns human-readable differences between params and the topology."""
        problems: List[str] = []
        layout = parameter_layout(self.config)
        expected, actual = list(layout), self.params.names()
        for name in expected:
            if name not in self.params:
                problems.append(f"missing parameter {name}")
            elif self.params[name].shape != layout[name][0]:
                problems.append(
                    f"{name}: shape {self.params[name].shape} != {layout[name][0]}"
                )
        problems.extend(f"unexpected parameter {n}" for n in actual if n not in layout)
        if not problems and expected != actual:
            problems.append("parameter order differs from the topology")
        return problems

    def __repr__(self) -> str:
        return (
            f"<GtnNetwork M={self.config.levels} N={self.config.layers} "
            f"params={self.params.num_scalars()}>"
        )


def build_gtn(config: GtnConfig, seed: int) -> GtnNetwork:
    """Builds a GTN with deterministic initialization.

    Weights are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero,
    LSTM forget-gate biases 1.0.

    Raises:
        ConfigurationError: If the topology is invalid.
    """
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    s = config.lstm_size
    for name, (shape, fan_in) in parameter_layout(config).items():
        if fan_in > 0:
            bound = 1.0 / np.sqrt(fan_in)
            value = rng.uniform(-bound, bound, size=shape)
        else:
            value = np.zeros(shape)
        if name.startswith("lstm.") and name.endswith(".bias"):
            value[s : 2 * s] = 1.0
        params.add(name, value)

    net = GtnNetwork(config, params)
    logger.debug(
        "GTN built",
        extra={
            "levels": config.levels,
            "layers": config.layers,
            "scalars": params.num_scalars(),
            "seed": seed,
        },
    )
    return net


@dataclass
class StepNodes:
    """Tape node ids produced by one recorded forward step."""

    level_states: List[int]
    level_activations: List[int]
    hidden: int
    logits: Dict[int, int] = field(default_factory=dict)
    policies: Dict[int, int] = field(default_factory=dict)
    value: int = -1


def _sample_noise(net: GtnNetwork) -> Optional[List[Optional[np.ndarray]]]:
    if not net._noise:
        return None
    size = net.config.lstm_size
    noise: List[Optional[np.ndarray]] = []
    for m in range(1, net.config.levels + 1):
        rng = net._noise.get(m)
        noise.append(None if rng is None else np.asarray(rng.standard_normal(size), dtype=np.float64))
    return noise


def record_step(
    net: GtnNetwork, tape: Tape, obs: np.ndarray, state_nodes: Sequence[int]
) -> StepNodes:
    """Records one forward step of `net` on `tape`.

    Args:
        net: Network whose ParameterSet the tape was opened over
        tape: Tape to record into
        obs: Observation of shape [1, side, side]
        state_nodes: One [2, S] node per level holding (hidden, cell)

    Returns:
        Node ids of every output of the step
    """
    config = net.config
    if len(state_nodes) != config.levels:
        raise UsageError(
            f"Expected {config.levels} recurrent states, got {len(state_nodes)}"
        )
    side = config.input_side
    if obs.shape != (1, side, side):
        raise UsageError(f"Observation shape {obs.shape} != (1, {side}, {side})")

    tap = tape.leaf(obs)
    new_states: List[int] = []
    activations: List[int] = []
    for plan in net.plans:
        m = plan.level
        x = tap
        for n in range(1, len(plan.conv_sides) + 1):
            x = tape.relu(
                tape.conv2d(x, conv_name(m, n, "weight"), conv_name(m, n, "bias"), config.stride)
            )
            if n == 1:
                tap = x
        state = tape.lstm(
            tape.flatten(x),
            state_nodes[m - 1],
            lstm_name(m, "w_x"),
            lstm_name(m, "w_h"),
            lstm_name(m, "bias"),
        )
        new_states.append(state)
        activations.append(tape.take(state, 0))

    pre = tape.concat(
        activations,
        [tower_name(m) for m in range(1, config.levels + 1)],
        "concat.bias",
        noise=_sample_noise(net),
    )
    hidden = tape.relu(pre)
    nodes = StepNodes(level_states=new_states, level_activations=activations, hidden=hidden)
    for size in config.action_space_sizes:
        logits = tape.linear(hidden, policy_name(size, "weight"), policy_name(size, "bias"))
        nodes.logits[size] = logits
        nodes.policies[size] = tape.softmax(logits)
    nodes.value = tape.linear(hidden, "value.weight", "value.bias")
    return nodes


def state_leaves(tape: Tape, recurrent: Sequence[LstmState]) -> List[int]:
    return [tape.leaf(np.stack([s.hidden, s.cell])) for s in recurrent]


def result_from_nodes(tape: Tape, nodes: StepNodes) -> ForwardResult:
    return ForwardResult(
        policies={k: tape.value(v) for k, v in nodes.policies.items()},
        value=float(tape.value(nodes.value)[0]),
        new_recurrent=[
            LstmState(hidden=tape.value(s)[0].copy(), cell=tape.value(s)[1].copy())
            for s in nodes.level_states
        ],
        level_activations=[tape.value(a) for a in nodes.level_activations],
        logits={k: tape.value(v) for k, v in nodes.logits.items()},
        hidden=tape.value(nodes.hidden),
    )


def gtn_forward(
    net: GtnNetwork, obs: np.ndarray, recurrent_in: Optional[Sequence[LstmState]] = None
) -> ForwardResult:
    """Runs one forward step without keeping the tape.

    Args:
        net: Network to evaluate
        obs: Observation [1, side, side]
        recurrent_in: M LSTM states; defaults to `net.recurrent`

    Returns:
        ForwardResult; `net.recurrent` is not modified.

    Raises:
        UsageError: If the recurrent state count is not M.
    """
    if recurrent_in is None:
        recurrent_in = net.recurrent
    if len(recurrent_in) != net.config.levels:
        raise UsageError(
            f"Expected {net.config.levels} recurrent states, got {len(recurrent_in)}"
        )
    tape = Tape(net.params)
    nodes = record_step(net, tape, np.asarray(obs, dtype=np.float64), state_leaves(tape, recurrent_in))
    return result_from_nodes(tape, nodes)


def copy_parameters(src: GtnNetwork, dst: GtnNetwork) -> None:
    """Copies every parameter of `src` into `dst`; recurrent state is untouched.

    Raises:
        UsageError: If the configurations differ.
    """
    if src.config != dst.config:
        raise UsageError("copy_parameters requires identical GTN configurations")
    dst.params.copy_from(src.params)


def set_level_noise(net: GtnNetwork, level: int, enabled: bool, rng=None) -> None:
    """Enables or disables N(0,1) noise on a_level before the concatenation.

    While enabled, each forward draws a fresh sample from
    `rng.standard_normal(S)`.

    Raises:
        UsageError: If the level is out of range or no rng is given.
    """
    if not 1 <= level <= net.config.levels:
        raise UsageError(f"Level {level} outside 1..{net.config.levels}")
    if enabled:
        if rng is None:
            raise UsageError("Noise injection needs a random generator")
        net._noise[level] = rng
    else:
        net._noise.pop(level, None)


def clear_noise(net: GtnNetwork) -> None:
    net._noise.clear()
