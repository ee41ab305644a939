# gtn/trainer/loop.py

"""Asynchronous training: one global store, one thread per worker.

Each worker owns a local GTN and a shooter environment. It snapshots the
global parameters, collects a rollout and pushes the accumulated gradients
to the global store, until its task's episode budget or the global update
budget is spent.
"""

import json
import logging
import threading
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from gtn.core.exceptions import ConfigurationError, TrainingError
from gtn.envs.shooter import ShooterEnv, TaskSpec
from gtn.model.config import GtnConfig
from gtn.model.network import GtnNetwork, build_gtn
from gtn.trainer.config import TrainConfig
from gtn.trainer.rollout import accumulate_gradients, collect_rollout
from gtn.trainer.store import GlobalStore, clone_global, create_store

logger = logging.getLogger(__name__)

# (episodes finished over all tasks, consistent copy of the global net)
SnapshotCallback = Callable[[int, GtnNetwork], None]


class TrainingLog:
    """Per-episode training records, kept in memory and optionally as JSON lines.

    Record keys: task_id, episode, update_counter, raw_score,
    normalized_return, worker.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None) -> None:
        self.path = Path(path) if path is not None else None
        self.records: List[Dict[str, Any]] = []
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, record: Dict[str, Any]) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(record, sort_keys=True) + "\n")

    def scores(self, task_id: str) -> List[float]:
        with self._lock:
            return [r["raw_score"] for r in self.records if r["task_id"] == task_id]

    def __len__(self) -> int:
        with self._lock:
            return len(self.records)


def check_tasks(tasks: List[TaskSpec], model: GtnConfig) -> None:
    """Raises ConfigurationError when a task cannot run on the model."""
    for i, spec in enumerate(tasks):
        if spec.render_side != model.input_side:
            raise ConfigurationError(
                f"Task {i} renders at side {spec.render_side}, model input_side is {model.input_side}"
            )
        if spec.action_count not in model.action_space_sizes:
            raise ConfigurationError(
                f"Task {i} has {spec.action_count} actions, "
                f"not among action_space_sizes {model.action_space_sizes}"
            )


class Worker(threading.Thread):
    """One actor-learner thread pinned to a single task."""

    def __init__(
        self,
        index: int,
        task_name: str,
        spec: TaskSpec,
        store: GlobalStore,
        config: TrainConfig,
        beta: float,
        seed: np.random.SeedSequence,
        log: TrainingLog,
        stop: threading.Event,
        on_snapshot: Optional[SnapshotCallback] = None,
    ) -> None:
        super().__init__(name=f"gtn-worker-{index}", daemon=True)
        self.index = index
        self.task_name = task_name
        self.spec = spec
        self.store = store
        self.config = config
        self.beta = beta
        self.log = log
        self.stop = stop
        self.on_snapshot = on_snapshot
        env_seed, action_seed = seed.spawn(2)
        self.env = ShooterEnv(spec, int(env_seed.generate_state(1)[0]), name=task_name)
        self.rng = np.random.default_rng(action_seed)
        self.local = build_gtn(store.net.config, seed=0)
        self.error: Optional[BaseException] = None
        self.updates = 0

    def run(self) -> None:
        logger.info(
            "Worker started",
            extra={"worker": self.index, "task": self.task_name, "tier": self.spec.tier},
        )
        try:
            self._loop()
        except BaseException as e:
            self.error = e
            self.stop.set()
            logger.error(
                "Worker failed",
                exc_info=True,
                extra={"worker": self.index, "task": self.task_name},
            )
            return
        logger.info(
            "Worker stopped",
            extra={"worker": self.index, "task": self.task_name, "updates": self.updates},
        )

    def _budget_spent(self) -> bool:
        if self.stop.is_set():
            return True
        max_updates = self.config.max_updates
        if max_updates is not None and self.store.update_counter >= max_updates:
            self.stop.set()
            return True
        return self.store.episodes(self.task_name) >= self.config.total_episodes

    def _loop(self) -> None:
        episode_return = 0.0
        while not self._budget_spent():
            self.store.snapshot_into(self.local)
            self.local.params.zero_grad()

            buffer = collect_rollout(
                self.local, self.env, self.config.t_max, self.rng, self.config.epsilon
            )
            episode_return += sum(buffer.rewards)
            accumulate_gradients(buffer, self.local, self.beta, self.config.gamma)
            if self.store.apply_update(self.local.params.grads()):
                self.updates += 1

            if buffer.terminal:
                self._finish_episode(episode_return)
                episode_return = 0.0

    def _finish_episode(self, episode_return: float) -> None:
        task_count, total = self.store.record_episode(self.task_name)
        self.log.write(
            {
                "task_id": self.task_name,
                "episode": task_count,
                "update_counter": self.store.update_counter,
                "raw_score": self.env.episode_score,
                "normalized_return": episode_return,
                "worker": self.index,
            }
        )
        every = self.config.checkpoint_every
        if self.on_snapshot is not None and every and total % every == 0:
            self.on_snapshot(total, clone_global(self.store))


def train(
    config: TrainConfig,
    model: GtnConfig,
    log_path: Optional[Union[str, Path]] = None,
    on_snapshot: Optional[SnapshotCallback] = None,
) -> Tuple[GlobalStore, TrainingLog]:
    """Trains one GTN on every task of `config` concurrently.

    Worker i plays task i mod len(tasks). With a single worker the run is
    fully determined by `config.seed`.

    Args:
        config: Training settings and task list
        model: Topology of the shared network
        log_path: Optional JSON-lines file receiving one record per episode
        on_snapshot: Called with a copy of the global network every
            `config.checkpoint_every` finished episodes

    Returns:
        (global store, training log)

    Raises:
        ConfigurationError: If a task does not fit the model.
        TrainingError: If any worker raised; training is aborted.
    """
    check_tasks(config.tasks, model)
    names = config.names()
    beta = model.entropy_coeff if config.entropy_coeff is None else config.entropy_coeff

    store = create_store(
        build_gtn(model, seed=config.seed), names, config.lr, config.decay, config.rms_eps
    )
    log = TrainingLog(log_path)
    stop = threading.Event()
    seeds = np.random.SeedSequence(config.seed).spawn(config.workers)

    workers = []
    for i in range(config.workers):
        task = config.task_of_worker(i)
        workers.append(
            Worker(
                index=i,
                task_name=names[task],
                spec=config.tasks[task],
                store=store,
                config=config,
                beta=beta,
                seed=seeds[i],
                log=log,
                stop=stop,
                on_snapshot=on_snapshot,
            )
        )

    logger.info(
        "Training started",
        extra={
            "workers": config.workers,
            "tasks": names,
            "episodes_per_task": config.total_episodes,
            "levels": model.levels,
            "layers": model.layers,
            "seed": config.seed,
        },
    )
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()

    failed = [w for w in workers if w.error is not None]
    if failed:
        first = failed[0]
        raise TrainingError(
            f"Worker {first.index} on task '{first.task_name}' failed: {first.error!r}",
            worker=first.index,
            task=first.task_name,
        ) from first.error

    logger.info(
        "Training finished",
        extra={
            "updates": store.update_counter,
            "episodes": dict(store.episode_counts),
            "rejected_updates": store.rejected_updates,
            "torn_snapshots": store.torn_snapshots,
        },
    )
    return store, log
