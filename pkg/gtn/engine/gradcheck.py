# gtn/engine/gradcheck.py

"""Central finite-difference gradients, the oracle for `backward`."""

from typing import Callable, Dict, Iterable, Mapping, Optional

import numpy as np

from gtn.engine.tensor import ParameterSet


def finite_difference_gradient(
    loss_fn: Callable[[], float],
    params: ParameterSet,
    h: float = 1e-5,
    names: Optional[Iterable[str]] = None,
) -> Dict[str, np.ndarray]:
    """Estimates dLoss/dp by (f(p+h) - f(p-h)) / 2h for every scalar parameter.

    `loss_fn` must read the parameters from `params` and be deterministic.
    Each parameter is restored exactly after its two evaluations.

    Args:
        loss_fn: Zero-argument callable evaluating the scalar loss
        params: Parameters to perturb in place
        h: Finite-difference step
        names: Subset of parameter names to perturb (default: all)

    Returns:
        Parameter name -> estimated gradient, shaped like the parameter
    """
    estimate: Dict[str, np.ndarray] = {}
    for name in names if names is not None else params.names():
        value = params[name]
        grad = np.zeros_like(value)
        flat_value = value.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat_value.size):
            original = flat_value[i]
            flat_value[i] = original + h
            plus = loss_fn()
            flat_value[i] = original - h
            minus = loss_fn()
            flat_value[i] = original
            flat_grad[i] = (plus - minus) / (2.0 * h)
        estimate[name] = grad
    return estimate


def max_relative_error(
    analytic: Mapping[str, np.ndarray], numeric: Mapping[str, np.ndarray], floor: float = 1e-8
) -> float:
    """max |a - b| / max(|a|, |b|, floor) over every entry present in `numeric`."""
    worst = 0.0
    for name, b in numeric.items():
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst
