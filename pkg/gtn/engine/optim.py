# gtn/engine/optim.py

"""RMSProp with per-parameter running statistics."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from gtn.core.exceptions import UsageError
from gtn.engine.tensor import ParameterSet

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """Second-moment accumulators and hyperparameters of one RMSProp instance.

    Attributes:
        lr: Learning rate
        decay: Smoothing constant of the running average
        eps: Added inside the square root of the denominator
        accumulators: Parameter name -> running mean of squared gradients
        steps: Number of updates applied
    """

    lr: float = 7e-4
    decay: float = 0.99
    eps: float = 0.1
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0

    @classmethod
    def for_params(
        cls, params: ParameterSet, lr: float = 7e-4, decay: float = 0.99, eps: float = 0.1
    ) -> "OptimizerState":
        return cls(
            lr=lr,
            decay=decay,
            eps=eps,
            accumulators={name: np.zeros_like(v) for name, v in params.items()},
        )


def rmsprop_update(
    params: ParameterSet, grads: Mapping[str, np.ndarray], state: OptimizerState
) -> None:
    """Applies one in-place RMSProp step.

    acc <- decay * acc + (1 - decay) * g^2
    p   <- p - lr * g / sqrt(acc + eps)

    Raises:
        UsageError: If a gradient is missing or misshaped.
    """
    for name, value in params.items():
        g = grads.get(name)
        if g is None or g.shape != value.shape:
            raise UsageError(f"Gradient for {name} missing or misshaped")
        acc = state.accumulators.get(name)
        if acc is None:
            acc = state.accumulators[name] = np.zeros_like(value)
        acc *= state.decay
        acc += (1.0 - state.decay) * g * g
        value -= state.lr * g / np.sqrt(acc + state.eps)
    state.steps += 1
