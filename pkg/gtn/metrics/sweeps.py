# gtn/metrics/sweeps.py

"""RAPS sweeps over the number of trained tasks and over training progress."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from gtn.core.domain import SensitivityReport
from gtn.core.exceptions import UsageError
from gtn.metrics.sensitivity import sensitivity_report
from gtn.model.config import GtnConfig
from gtn.model.network import GtnNetwork
from gtn.trainer.config import TrainConfig
from gtn.trainer.loop import train

logger = logging.getLogger(__name__)

AXIS_TASKS = "tasks"
AXIS_EPISODES = "episodes"


@dataclass
class RapsRow:
    """One RAPS measurement of a sweep."""

    axis: str
    task_count: int
    seed: int
    report: SensitivityReport
    episode: Optional[int] = None
    task_ids: List[str] = field(default_factory=list)

    @property
    def defined(self) -> bool:
        return self.report.raps_defined


def subset_config(template: TrainConfig, count: int, seed: int) -> TrainConfig:
    """The template restricted to its first `count` tasks, with every task pinned."""
    if not 1 <= count <= len(template.tasks):
        raise UsageError(
            f"Task count {count} outside 1..{len(template.tasks)} available tasks"
        )
    data = template.model_dump()
    data["tasks"] = data["tasks"][:count]
    data["task_names"] = template.names()[:count]
    data["workers"] = max(template.workers, count)
    data["seed"] = seed
    return TrainConfig(**data)


def raps_sweep(
    template: TrainConfig,
    model: GtnConfig,
    task_counts: Sequence[int],
    episodes: int,
    seeds: Sequence[int],
    greedy: bool = True,
) -> List[RapsRow]:
    """Trains a fresh GTN per (task count, seed) and measures its RAPS.

    Sensitivity is averaged over the tasks the network was trained on.

    Returns:
        len(task_counts) x len(seeds) rows
    """
    rows: List[RapsRow] = []
    for count in task_counts:
        for seed in seeds:
            config = subset_config(template, count, seed)
            store, _ = train(config, model)
            report = sensitivity_report(
                store.net, config.tasks, episodes, seed, greedy, task_ids=config.names()
            )
            rows.append(
                RapsRow(
                    axis=AXIS_TASKS,
                    task_count=count,
                    seed=seed,
                    report=report,
                    task_ids=config.names(),
                )
            )
            logger.info(
                "RAPS sweep point done",
                extra={"task_count": count, "seed": seed, "raps": report.raps},
            )
    return rows


def raps_episode_sweep(
    template: TrainConfig,
    model: GtnConfig,
    checkpoint_every: int,
    episodes: int,
    seeds: Sequence[int],
    greedy: bool = True,
) -> List[RapsRow]:
    """RAPS of snapshots taken every `checkpoint_every` episodes of one run per seed."""
    rows: List[RapsRow] = []
    for seed in seeds:
        data = template.model_dump()
        data.update(seed=seed, checkpoint_every=checkpoint_every)
        config = TrainConfig(**data)
        snapshots: List[Tuple[int, GtnNetwork]] = []
        train(config, model, on_snapshot=lambda total, net: snapshots.append((total, net)))
        for total, net in snapshots:
            report = sensitivity_report(
                net, config.tasks, episodes, seed, greedy, task_ids=config.names()
            )
            rows.append(
                RapsRow(
                    axis=AXIS_EPISODES,
                    task_count=len(config.tasks),
                    seed=seed,
                    report=report,
                    episode=total,
                    task_ids=config.names(),
                )
            )
        logger.info(
            "RAPS episode sweep done", extra={"seed": seed, "snapshots": len(snapshots)}
        )
    return rows


def top_level_trend(rows: Sequence[RapsRow]) -> Dict[str, object]:
    """Spearman correlation of task count against the top level's RAPS.

    Computed per seed over defined rows; seeds with fewer than two
    distinct counts or constant RAPS are skipped.

    Returns:
        {"per_seed": {seed: rho}, "mean": mean rho or None}
    """
    by_seed: Dict[int, List[Tuple[int, float]]] = {}
    for row in rows:
        if row.defined:
            by_seed.setdefault(row.seed, []).append((row.task_count, row.report.raps[-1]))

    per_seed: Dict[int, float] = {}
    for seed, points in sorted(by_seed.items()):
        counts, top = zip(*points)
        if len(set(counts)) < 2 or len(set(top)) < 2:
            continue
        rho = stats.spearmanr(counts, top).statistic
        if np.isfinite(rho):
            per_seed[seed] = float(rho)

    mean = float(np.mean(list(per_seed.values()))) if per_seed else None
    return {"per_seed": per_seed, "mean": mean}
