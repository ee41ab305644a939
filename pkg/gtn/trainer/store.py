# gtn/trainer/store.py

"""Lock-guarded global parameter store shared by all training workers."""

import logging
import threading
from typing import Dict, List, Mapping, Tuple

import numpy as np

from gtn.core.exceptions import UsageError
from gtn.engine.optim import OptimizerState, rmsprop_update
from gtn.engine.tensor import check_grads_shaped, is_finite
from gtn.model.network import GtnNetwork, build_gtn, copy_parameters

logger = logging.getLogger(__name__)


class GlobalStore:
    """Global GTN parameters, optimizer statistics and shared counters.

    Snapshots and updates are serialized by one lock. Every update is
    bracketed by begin/end stamps; a snapshot that observes differing
    stamps is counted in `torn_snapshots`. While every writer goes through
    `apply_update` the stamps always agree under the lock, so the count
    stays 0 structurally; a nonzero count means some code path mutated the
    parameters without finishing its update bracket.
    """

    def __init__(
        self, net: GtnNetwork, optimizer: OptimizerState, task_names: List[str]
    ) -> None:
        self.net = net
        self.optimizer = optimizer
        self.update_counter = 0
        self.rejected_updates = 0
        self.torn_snapshots = 0
        self.episode_counts: Dict[str, int] = {name: 0 for name in task_names}
        self._update_begin = 0
        self._update_end = 0
        self._lock = threading.Lock()

    def snapshot_into(self, local: GtnNetwork) -> int:
        """Snapshot: copies the global parameters into a worker's network.

        Returns:
            The update counter the copy corresponds to
        """
        with self._lock:
            begin = self._update_begin
            copy_parameters(self.net, local)
            end = self._update_end
            if begin != end or end != self.update_counter:
                self.torn_snapshots += 1
                logger.warning(
                    "Torn snapshot detected",
                    extra={"begin": begin, "end": end, "counter": self.update_counter},
                )
            return self.update_counter

    def apply_update(self, grads: Mapping[str, np.ndarray]) -> bool:
        """Update: one RMSProp step on the global parameters.

        Returns:
            False when the gradients hold NaN/Inf and the update was rejected.

        Raises:
            UsageError: If a gradient is missing or misshaped.
        """
        bad = check_grads_shaped(self.net.params, dict(grads))
        if bad is not None:
            raise UsageError(f"Gradient for {bad} missing or misshaped")
        non_finite = [name for name, g in grads.items() if not is_finite(g)]

        with self._lock:
            if non_finite:
                self.rejected_updates += 1
                logger.warning(
                    "Non-finite gradients, update rejected",
                    extra={"tensors": non_finite[:5], "counter": self.update_counter},
                )
                return False
            self._update_begin += 1
            rmsprop_update(self.net.params, grads, self.optimizer)
            self.update_counter += 1
            self._update_end += 1
            counter = self.update_counter

        logger.debug("Global update applied", extra={"counter": counter})
        return True

    def record_episode(self, task: str) -> Tuple[int, int]:
        """Counts a finished episode of `task`.

        Returns:
            (episodes of the task, episodes over all tasks)
        """
        with self._lock:
            self.episode_counts[task] += 1
            return self.episode_counts[task], sum(self.episode_counts.values())

    def episodes(self, task: str) -> int:
        with self._lock:
            return self.episode_counts[task]

    def total_episodes(self) -> int:
        with self._lock:
            return sum(self.episode_counts.values())

    def params_finite(self) -> bool:
        with self._lock:
            return self.net.params.all_finite()

    def __repr__(self) -> str:
        return (
            f"<GlobalStore updates={self.update_counter} "
            f"episodes={self.episode_counts} torn={self.torn_snapshots}>"
        )


def create_store(
    net: GtnNetwork,
    task_names: List[str],
    lr: float = 7e-4,
    decay: float = 0.99,
    eps: float = 0.1,
) -> GlobalStore:
    return GlobalStore(net, OptimizerState.for_params(net.params, lr, decay, eps), task_names)


def apply_update(store: GlobalStore, grads: Mapping[str, np.ndarray]) -> bool:
    """Applies `grads` to the store; see `GlobalStore.apply_update`."""
    return store.apply_update(grads)


def clone_global(store: GlobalStore) -> GtnNetwork:
    """Returns a fresh network holding a consistent copy of the global parameters."""
    clone = build_gtn(store.net.config, seed=0)
    store.snapshot_into(clone)
    return clone
