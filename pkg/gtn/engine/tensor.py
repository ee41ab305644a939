# gtn/engine/tensor.py

"""Named parameter storage with parallel gradient slots."""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from gtn.core.exceptions import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

# Tensors are plain numpy arrays; 64-bit unless a checkpoint asks otherwise.
Tensor = np.ndarray
DEFAULT_DTYPE = np.float64


def as_tensor(data, dtype=DEFAULT_DTYPE) -> Tensor:
    """Returns a contiguous array of the working precision."""
    return np.ascontiguousarray(data, dtype=dtype)


def is_finite(tensor: Tensor) -> bool:
    return bool(np.all(np.isfinite(tensor)))


class ParameterSet:
    """Ordered map of parameter name -> tensor plus gradient slots.

    Insertion order is preserved, so iteration is deterministic. Gradient
    slots always have the shape of their parameter and are only written by
    accumulation (+=); callers zero them explicitly.
    """

    def __init__(self) -> None:
        self._values: Dict[str, Tensor] = {}
        self._grads: Dict[str, Tensor] = {}

    def add(self, name: str, value: Tensor) -> None:
        """Registers a new parameter with a zeroed gradient slot.

        Raises:
            ConfigurationError: If the name is already registered.
        """
        if name in self._values:
            raise ConfigurationError(f"Duplicate parameter name: {name}")
        value = as_tensor(value)
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __getitem__(self, name: str) -> Tensor:
        return self._values[name]

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def names(self) -> List[str]:
        return list(self._values)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._values.items())

    def grad(self, name: str) -> Tensor:
        return self._grads[name]

    def grads(self) -> Dict[str, Tensor]:
        return self._grads

    def set(self, name: str, value: Tensor) -> None:
        """Overwrites a parameter in place, keeping its shape."""
        target = self._values[name]
        if target.shape != np.shape(value):
            raise UsageError(
                f"Shape mismatch for {name}: {target.shape} vs {np.shape(value)}"
            )
        target[...] = value

    def accumulate(self, name: str, grad: Tensor) -> None:
        self._grads[name] += grad

    def zero_grad(self) -> None:
        for g in self._grads.values():
            g.fill(0.0)

    def num_scalars(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {k: v.shape for k, v in self._values.items()}

    def copy(self) -> "ParameterSet":
        """Deep copy of values; gradient slots start at zero."""
        clone = ParameterSet()
        for name, value in self._values.items():
            clone.add(name, value.copy())
        return clone

    def copy_from(self, other: "ParameterSet") -> None:
        """Overwrites every value with the matching value of `other`.

        Raises:
            UsageError: If names or shapes differ.
        """
        if self.shapes() != other.shapes() or self.names() != other.names():
            raise UsageError("Cannot copy between parameter sets of different layout")
        for name, value in other.items():
            np.copyto(self._values[name], value)

    def grads_copy(self) -> Dict[str, Tensor]:
        return {k: v.copy() for k, v in self._grads.items()}

    def all_finite(self) -> bool:
        return all(is_finite(v) for v in self._values.values())

    def max_abs_diff(self, other: "ParameterSet") -> float:
        return float(
            max(
                (np.max(np.abs(v - other[k])) if v.size else 0.0)
                for k, v in self._values.items()
            )
        )

    def flat(self) -> Tensor:
        return np.concatenate([v.ravel() for v in self._values.values()])

    def __repr__(self) -> str:
        return f"<ParameterSet tensors={len(self)} scalars={self.num_scalars()}>"


def check_grads_shaped(params: ParameterSet, grads: Dict[str, Tensor]) -> Optional[str]:
    """Returns the first name whose gradient does not match, or None."""
    for name, value in params.items():
        g = grads.get(name)
        if g is None or g.shape != value.shape:
            return name
    return None
