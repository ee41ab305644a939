# gtn/engine/tape.py

"""Computation tape recording GTN forward passes for reverse-mode gradients.

A `Tape` executes each operation as it is recorded, so the recorded forward
pass is the forward pass. Nodes are addressed by integer ids; parameters
are addressed by their `ParameterSet` names. `backward` walks the tape in
reverse, accumulating parameter derivatives into the gradient slots.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gtn.core.exceptions import UsageError
from gtn.engine import layers
from gtn.engine.tensor import ParameterSet

logger = logging.getLogger(__name__)


@dataclass
class _Node:
    op: str
    value: np.ndarray
    parents: Tuple[int, ...] = ()
    params: Tuple[str, ...] = ()
    cache: Any = None


class Tape:
    """Records operations over one `ParameterSet` for a later `backward`."""

    def __init__(self, params: ParameterSet) -> None:
        self.params = params
        self._nodes: List[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _push(self, node: _Node) -> int:
        self._nodes.append(node)
        return len(self._nodes) - 1

    def value(self, node_id: int) -> np.ndarray:
        return self._nodes[node_id].value

    def leaf(self, value: np.ndarray) -> int:
        """Adds a constant input (observation, detached recurrent state)."""
        return self._push(_Node("leaf", np.asarray(value)))

    def conv2d(self, x: int, weight: str, bias: str, stride: int) -> int:
        out, cache = layers.conv2d_forward(
            self.value(x), self.params[weight], self.params[bias], stride
        )
        return self._push(_Node("conv2d", out, (x,), (weight, bias), cache))

    def relu(self, x: int) -> int:
        out, cache = layers.relu_forward(self.value(x))
        return self._push(_Node("relu", out, (x,), (), cache))

    def flatten(self, x: int) -> int:
        v = self.value(x)
        return self._push(_Node("flatten", v.reshape(-1), (x,), (), v.shape))

    def lstm(self, x: int, state: int, w_x: str, w_h: str, bias: str) -> int:
        """LSTM step; `state` and the result are stacked [hidden, cell] of shape [2, S]."""
        s = self.value(state)
        h, c, cache = layers.lstm_forward(
            self.value(x),
            s[0],
            s[1],
            self.params[w_x],
            self.params[w_h],
            self.params[bias],
        )
        return self._push(
            _Node("lstm", np.stack([h, c]), (x, state), (w_x, w_h, bias), cache)
        )

    def take(self, x: int, index: int) -> int:
        v = self.value(x)
        return self._push(_Node("take", v[index], (x,), (), (v.shape, index)))

    def linear(self, x: int, weight: str, bias: str) -> int:
        out, cache = layers.linear_forward(
            self.value(x), self.params[weight], self.params[bias]
        )
        return self._push(_Node("linear", out, (x,), (weight, bias), cache))

    def softmax(self, x: int) -> int:
        out, cache = layers.softmax_forward(self.value(x))
        return self._push(_Node("softmax", out, (x,), (), cache))

    def concat(
        self,
        activations: Sequence[int],
        towers: Sequence[str],
        bias: str,
        noise: Optional[Sequence[Optional[np.ndarray]]] = None,
    ) -> int:
        """Tower concatenation pre-activation. `noise[m]`, when given, is added to a_m first.

        Noise enters as a constant: it shifts the forward values and the
        T-matrix derivatives, never the derivatives of a_m.
        """
        values = [self.value(a) for a in activations]
        if noise is not None:
            values = [v if n is None else v + n for v, n in zip(values, noise)]
        out, cache = layers.concat_forward(
            values, [self.params[t] for t in towers], self.params[bias]
        )
        return self._push(
            _Node("concat", out, tuple(activations), (*towers, bias), cache)
        )


def _backward_node(node: _Node, dout: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Returns (parent derivatives, parameter derivatives) of one node."""
    op = node.op
    if op == "conv2d":
        dx, dw, db = layers.conv2d_backward(dout, node.cache)
        return [dx], [dw, db]
    if op == "relu":
        return [layers.relu_backward(dout, node.cache)], []
    if op == "flatten":
        return [dout.reshape(node.cache)], []
    if op == "lstm":
        dx, dh, dc, dw_x, dw_h, db = layers.lstm_backward(dout[0], dout[1], node.cache)
        return [dx, np.stack([dh, dc])], [dw_x, dw_h, db]
    if op == "take":
        shape, index = node.cache
        full = np.zeros(shape, dtype=dout.dtype)
        full[index] = dout
        return [full], []
    if op == "linear":
        dx, dw, db = layers.linear_backward(dout, node.cache)
        return [dx], [dw, db]
    if op == "softmax":
        return [layers.softmax_backward(dout, node.cache)], []
    if op == "concat":
        d_act, d_towers, d_bias = layers.concat_backward(dout, node.cache)
        return d_act, [*d_towers, d_bias]
    raise UsageError(f"No backward rule for op '{op}'")


def backward(tape: Tape, seeds: Dict[int, np.ndarray]) -> None:
    """Backpropagates `seeds` (node id -> dLoss/dnode) through the tape.

    Parameter derivatives are added (+=) into the gradient slots of the
    tape's ParameterSet; slots are not zeroed here.

    Raises:
        UsageError: If nothing was recorded or a seed addresses no node.
    """
    if len(tape) == 0:
        raise UsageError("backward called before any forward pass was recorded")
    for node_id, seed in seeds.items():
        if not 0 <= node_id < len(tape):
            raise UsageError(f"Seed for unknown node {node_id}")
        if np.shape(seed) != tape.value(node_id).shape:
            raise UsageError(
                f"Seed shape {np.shape(seed)} != node shape {tape.value(node_id).shape}"
            )

    grads: Dict[int, np.ndarray] = {
        k: np.array(v, dtype=np.float64, copy=True) for k, v in seeds.items()
    }
    last = max(grads) if grads else -1

    for node_id in range(last, -1, -1):
        dout = grads.pop(node_id, None)
        if dout is None:
            continue
        node = tape._nodes[node_id]
        if node.op == "leaf":
            continue
        d_parents, d_params = _backward_node(node, dout)
        for parent, d in zip(node.parents, d_parents):
            if parent in grads:
                grads[parent] = grads[parent] + d
            else:
                grads[parent] = d
        for name, d in zip(node.params, d_params):
            tape.params.accumulate(name, d)
