# gtn/service/experiments.py

"""Experiment orchestration behind the CLI subcommands.

Every `run_*` function writes its artifacts into one output directory and
finishes by writing `manifest.json`, which lists every file it produced.
"""

import json
import logging
import platform
import threading
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from gtn import __version__
from gtn.core.definitions import Artifact, ArchitectureTag
from gtn.core.domain import RunManifest, ScoreSample
from gtn.core.exceptions import ConfigurationError, ReferenceScoresError, UndefinedMetricError
from gtn.core.loader import ExperimentConfig, canonical_yaml, config_hash, validate_experiment
from gtn.envs.shooter import TaskSpec
from gtn.metrics import reports
from gtn.metrics.scoring import episode_score, mean_rfs, rfs
from gtn.metrics.sensitivity import hierarchy_holds, knowledge_matrix
from gtn.metrics.sweeps import raps_episode_sweep, raps_sweep, top_level_trend
from gtn.model.checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint, sidecar_path
from gtn.model.config import GtnConfig
from gtn.model.network import GtnNetwork, plan_levels
from gtn.service.config import settings
from gtn.trainer.config import TrainConfig
from gtn.trainer.loop import train

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

REFERENCE_HELP = (
    "Produce single-task reference scores by training one model per task "
    "(`gtn train --config <file with train.tasks: [NAME]> --out <dir>`), evaluating it "
    "(`gtn eval <dir>/model.gtn --config <same file> --out <eval dir>`), and passing each "
    "eval directory with `--reference <eval dir>`."
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def build_id() -> str:
    return f"gtn-desk {__version__}; numpy {np.__version__}; python {platform.python_version()}"


class RunRecorder:
    """Collects the artifacts of one command and writes its manifest."""

    def __init__(
        self,
        command: str,
        out_dir: PathLike,
        config: ExperimentConfig,
        seed: int,
        architecture: str = ArchitectureTag.GTN,
    ) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            command=command,
            config_hash=config_hash(config),
            seed=seed,
            started_at=_now(),
            build=build_id(),
            architecture=architecture,
        )
        self._lock = threading.Lock()
        config_path = self.artifact("config", Artifact.CONFIG)
        config_path.write_text(canonical_yaml(config), encoding="utf-8")

    def artifact(self, key: str, relative: str) -> Path:
        """Registers an artifact and returns its absolute path."""
        with self._lock:
            self.manifest.artifacts[key] = relative
        path = self.out_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def checkpoint(self, key: str, net: GtnNetwork, relative: str) -> Path:
        """Saves a checkpoint and registers it together with its sidecar."""
        path = self.artifact(key, relative)
        save_checkpoint(net, path, settings.checkpoint_precision)
        self.artifact(f"{key}_sidecar", str(sidecar_path(relative)))
        return path

    def finish(self, **extra: Any) -> RunManifest:
        self.manifest.finished_at = _now()
        self.manifest.extra.update(extra)
        path = self.out_dir / Artifact.MANIFEST
        path.write_text(json.dumps(asdict(self.manifest), indent=2, sort_keys=True, default=str))
        logger.info(
            "Run finished",
            extra={
                "command": self.manifest.command,
                "out_dir": str(self.out_dir),
                "artifacts": len(self.manifest.artifacts),
            },
        )
        return self.manifest


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    checkpoint_every: Optional[int] = None,
    model: Optional[GtnConfig] = None,
) -> ExperimentConfig:
    """Returns the effective config with command-line overrides applied and re-validated."""
    data = config.model_dump()
    for key, value in (("seed", seed), ("workers", workers), ("checkpoint_every", checkpoint_every)):
        if value is not None:
            data["train"][key] = value
    if model is not None:
        data["model"] = model.model_dump()
    return validate_experiment(data, source="<command line overrides>")


def single_task_config(config: ExperimentConfig, task: str, seed: int) -> TrainConfig:
    """One-worker training config for `task` alone."""
    return config.train_config(tasks=[config.tasks[task]], task_names=[task], workers=1, seed=seed)


def score_tasks(
    net: GtnNetwork,
    config: ExperimentConfig,
    names: Sequence[str],
    episodes: int,
    seed: int,
    greedy: bool,
) -> Dict[str, ScoreSample]:
    return {
        name: episode_score(
            net,
            config.tasks[name],
            episodes,
            greedy=greedy,
            seed=seed,
            task_id=name,
            baseline_episodes=config.metrics.baseline_episodes,
        )
        for name in names
    }


def _train_recorded(
    recorder: RunRecorder, config: ExperimentConfig, key: str = "checkpoint"
) -> Tuple[GtnNetwork, Dict[str, Any]]:
    """Trains `config` with the training log, periodic and final checkpoints recorded."""
    train_config = config.train_config()

    def on_snapshot(total: int, net: GtnNetwork) -> None:
        relative = f"{Artifact.CHECKPOINT_DIR}/model_ep{total:06d}.gtn"
        recorder.checkpoint(f"{key}_ep{total:06d}", net, relative)

    store, log = train(
        train_config,
        config.model,
        log_path=recorder.artifact("training_log", Artifact.TRAINING_LOG),
        on_snapshot=on_snapshot if train_config.checkpoint_every else None,
    )
    final = recorder.checkpoint(key, store.net, Artifact.CHECKPOINT)
    summary = {
        "tasks": train_config.names(),
        "workers": train_config.workers,
        "updates": store.update_counter,
        "episodes": dict(store.episode_counts),
        "rejected_updates": store.rejected_updates,
        "torn_snapshots": store.torn_snapshots,
        "log_records": len(log),
        "checkpoint_sha256": checkpoint_digest(final),
    }
    return store.net, summary


def run_train(
    config: ExperimentConfig,
    out_dir: PathLike,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    checkpoint_every: Optional[int] = None,
) -> RunManifest:
    """`train`: one training run with checkpoint, JSON-lines log and manifest."""
    effective = apply_overrides(config, seed, workers, checkpoint_every)
    recorder = RunRecorder("train", out_dir, effective, effective.train.seed)
    _, summary = _train_recorded(recorder, effective)
    return recorder.finish(**summary)


def _reference_report(path: Path) -> Path:
    """Resolves a reference argument to an eval report file."""
    if path.is_dir():
        path = path / Artifact.MANIFEST
    if path.name == Artifact.MANIFEST:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        relative = manifest.get("artifacts", {}).get("eval_report")
        if relative is None:
            raise ReferenceScoresError(
                f"Manifest {path} comes from no eval run (no eval_report artifact). "
                + REFERENCE_HELP
            )
        path = path.parent / relative
    return path


def load_reference_scores(paths: Sequence[PathLike]) -> Dict[str, float]:
    """Single-task adjusted scores by task id, merged from eval reports.

    Each path may be an eval output directory, its manifest, or its
    eval_report.json.

    Raises:
        ReferenceScoresError: If a file is missing or unreadable.
    """
    scores: Dict[str, float] = {}
    for raw in paths:
        path = Path(raw)
        if not path.exists():
            raise ReferenceScoresError(f"Reference scores {path} not found. " + REFERENCE_HELP)
        report_path = path
        try:
            report_path = _reference_report(path)
            report = json.loads(report_path.read_text(encoding="utf-8"))
            for task_id, sample in report["scores"].items():
                scores[task_id] = float(sample["mean_adjusted"])
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise ReferenceScoresError(
                f"Unusable reference scores {report_path}: {e}. " + REFERENCE_HELP
            ) from e
    logger.info("Reference scores loaded", extra={"tasks": sorted(scores)})
    return scores


def _require_references(references: Dict[str, float], names: Sequence[str]) -> None:
    missing = [n for n in names if n not in references]
    if missing:
        raise ReferenceScoresError(
            f"No single-task reference score for task(s) {missing}. " + REFERENCE_HELP
        )


def rfs_table(
    samples: Dict[str, ScoreSample], references: Dict[str, float]
) -> Tuple[List[List[Any]], Optional[float], int]:
    """RFS rows per task, the mean over defined tasks, and the undefined count."""
    rows: List[List[Any]] = []
    for name, sample in samples.items():
        single = references[name]
        try:
            value: Optional[float] = rfs(sample.mean_adjusted, single)
        except UndefinedMetricError as e:
            logger.warning(str(e), extra={"task": name})
            value = None
        rows.append([name, sample.mean_adjusted, single, value, value is not None])
    mean, excluded = mean_rfs([(s.mean_adjusted, references[n]) for n, s in samples.items()])
    return rows, mean, excluded


def run_eval(
    checkpoint: PathLike,
    config: ExperimentConfig,
    out_dir: PathLike,
    episodes: Optional[int] = None,
    seed: Optional[int] = None,
    greedy: Optional[bool] = None,
    references: Optional[Sequence[PathLike]] = None,
) -> RunManifest:
    """`eval`: per-task scores, plus the RFS table when reference scores are given.

    Raises:
        CheckpointError: If the checkpoint cannot be loaded.
        ReferenceScoresError: If given references are missing or incomplete.
    """
    seed = config.train.seed if seed is None else seed
    episodes = episodes or config.metrics.eval_episodes
    greedy = config.metrics.greedy if greedy is None else greedy
    reference_paths = list(references or [])
    if not reference_paths and config.metrics.references:
        reference_paths = [config.metrics.references]
    reference_scores = load_reference_scores(reference_paths) if reference_paths else None
    names = list(config.train.tasks)
    if reference_scores is not None:
        _require_references(reference_scores, names)

    net = load_checkpoint(checkpoint)
    recorder = RunRecorder("eval", out_dir, config, seed)
    samples = score_tasks(net, config, names, episodes, seed, greedy)
    reports.write_csv(
        recorder.artifact("scores_csv", Artifact.SCORES_CSV),
        reports.SCORES_HEADER,
        reports.score_rows(samples.values()),
    )

    report: Dict[str, Any] = {
        "checkpoint": str(checkpoint),
        "checkpoint_sha256": checkpoint_digest(checkpoint),
        "episodes": episodes,
        "greedy": greedy,
        "seed": seed,
        "scores": {name: reports.score_dict(s) for name, s in samples.items()},
        "rfs": None,
    }
    extra: Dict[str, Any] = {"tasks": names, "checkpoint": str(checkpoint)}
    if reference_scores is not None:
        rows, mean, excluded = rfs_table(samples, reference_scores)
        reports.write_csv(recorder.artifact("rfs_csv", Artifact.RFS_CSV), reports.RFS_HEADER, rows)
        report["rfs"] = {"per_task": {r[0]: r[3] for r in rows}, "mean": mean, "undefined": excluded}
        extra.update(mean_rfs=mean, undefined_rfs=excluded)
    else:
        logger.warning("No reference scores given; RFS table skipped. " + REFERENCE_HELP)

    reports.write_json(recorder.artifact("eval_report", Artifact.EVAL_REPORT), report)
    return recorder.finish(**extra)


def _single_task_references(
    config: ExperimentConfig, seed: int, episodes: int, greedy: bool
) -> Dict[str, float]:
    """Adjusted scores of single-task agents with the base topology."""
    references: Dict[str, float] = {}
    for name in config.train.tasks:
        store, _ = train(single_task_config(config, name, seed), config.model)
        references[name] = score_tasks(store.net, config, [name], episodes, seed, greedy)[
            name
        ].mean_adjusted
    return references


def _rfs_values(
    samples: Dict[str, ScoreSample], references: Dict[str, float]
) -> Tuple[List[float], int]:
    values, undefined = [], 0
    for name, sample in samples.items():
        try:
            values.append(rfs(sample.mean_adjusted, references[name]))
        except UndefinedMetricError:
            undefined += 1
    return values, undefined


def run_ablate(
    config: ExperimentConfig,
    out_dir: PathLike,
    levels: Sequence[int],
    layers: Sequence[int],
    seeds: Optional[Sequence[int]] = None,
    episodes: Optional[int] = None,
    greedy: Optional[bool] = None,
) -> RunManifest:
    """`ablate`: single-task and multi-task average RFS over an (M, N) grid.

    References are single-task agents with the configured base topology,
    trained per seed. The "single" mode trains one (M, N) network per
    task; the "multi" mode trains one (M, N) network on all tasks.
    """
    if not levels or not layers:
        raise ConfigurationError("ablate needs at least one M and one N")
    seeds = list(seeds or config.metrics.seeds)
    episodes = episodes or config.metrics.eval_episodes
    greedy = config.metrics.greedy if greedy is None else greedy
    names = list(config.train.tasks)
    try:
        models = {
            (m, n): config.model.with_changes(levels=m, layers=n) for m in levels for n in layers
        }
    except ValidationError as e:
        raise ConfigurationError(f"Invalid ablation grid: {e}") from e
    for model in models.values():
        plan_levels(model)

    recorder = RunRecorder("ablate", out_dir, config, seeds[0])
    references = {s: _single_task_references(config, s, episodes, greedy) for s in seeds}

    rows: List[List[Any]] = []
    for mode in ("single", "multi"):
        for (m, n), model in models.items():
            values: List[float] = []
            undefined = 0
            for seed in seeds:
                if mode == "single":
                    samples = {}
                    for name in names:
                        store, _ = train(single_task_config(config, name, seed), model)
                        samples.update(score_tasks(store.net, config, [name], episodes, seed, greedy))
                else:
                    store, _ = train(config.train_config(seed=seed), model)
                    samples = score_tasks(store.net, config, names, episodes, seed, greedy)
                seed_values, seed_undefined = _rfs_values(samples, references[seed])
                values.extend(seed_values)
                undefined += seed_undefined
            mean = float(np.mean(values)) if values else None
            rows.append([mode, m, n, len(seeds), mean, undefined])
            logger.info(
                "Ablation cell done",
                extra={"mode": mode, "levels": m, "layers": n, "mean_rfs": mean},
            )

    reports.write_csv(
        recorder.artifact("ablation_csv", Artifact.ABLATION_CSV), reports.ABLATION_HEADER, rows
    )
    return recorder.finish(
        levels=list(levels),
        layers=list(layers),
        seeds=seeds,
        references={str(s): r for s, r in references.items()},
    )


def run_raps(
    config: ExperimentConfig,
    out_dir: PathLike,
    task_counts: Optional[Sequence[int]] = None,
    seeds: Optional[Sequence[int]] = None,
    episodes: Optional[int] = None,
    greedy: Optional[bool] = None,
    episode_axis: bool = False,
    checkpoint_every: Optional[int] = None,
) -> RunManifest:
    """`raps`: RAPS per level over task counts, or over training progress."""
    seeds = list(seeds or config.metrics.seeds)
    episodes = episodes or config.metrics.aps_episodes
    greedy = config.metrics.greedy if greedy is None else greedy
    template = config.train_config()

    recorder = RunRecorder("raps", out_dir, config, seeds[0])
    if episode_axis:
        every = checkpoint_every or config.metrics.checkpoint_every or template.checkpoint_every
        if every is None:
            raise ConfigurationError("the episode-axis sweep needs --checkpoint-every")
        rows = raps_episode_sweep(template, config.model, every, episodes, seeds, greedy)
        trend = None
    else:
        counts = list(task_counts or range(1, len(template.tasks) + 1))
        rows = raps_sweep(template, config.model, counts, episodes, seeds, greedy)
        trend = top_level_trend(rows)

    levels = config.model.levels
    reports.write_csv(
        recorder.artifact("raps_csv", Artifact.RAPS_CSV),
        reports.raps_header(levels),
        reports.raps_rows(rows, levels),
    )
    reports.write_json(
        recorder.artifact("raps_report", Artifact.RAPS_REPORT), reports.raps_json(rows, trend)
    )
    return recorder.finish(
        episode_axis=episode_axis,
        rows=len(rows),
        undefined=sum(1 for r in rows if not r.defined),
        trend=trend,
    )


def run_baseline(
    config: ExperimentConfig,
    out_dir: PathLike,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    checkpoint_every: Optional[int] = None,
    compare: Optional[PathLike] = None,
    references: Optional[Sequence[PathLike]] = None,
    episodes: Optional[int] = None,
    greedy: Optional[bool] = None,
) -> RunManifest:
    """`baseline`: trains the M=1 surrogate of the multi-task A3C baseline.

    With `compare`, both the surrogate and the given GTN checkpoint are
    scored and a per-task RFS comparison is written.
    """
    model = config.model
    if model.levels != 1:
        logger.warning(
            "Baseline forces a single level; overriding M",
            extra={"configured_levels": model.levels},
        )
        model = model.with_changes(levels=1)
    effective = apply_overrides(config, seed, workers, checkpoint_every, model=model)

    reference_scores = None
    if compare is not None:
        reference_paths = list(references or [])
        if not reference_paths and config.metrics.references:
            reference_paths = [config.metrics.references]
        if not reference_paths:
            raise ReferenceScoresError(
                "The baseline comparison needs single-task reference scores. " + REFERENCE_HELP
            )
        reference_scores = load_reference_scores(reference_paths)
        _require_references(reference_scores, list(effective.train.tasks))

    recorder = RunRecorder(
        "baseline", out_dir, effective, effective.train.seed, ArchitectureTag.BASELINE
    )
    net, summary = _train_recorded(recorder, effective)
    if compare is None:
        return recorder.finish(**summary)

    eval_seed = effective.train.seed
    episodes = episodes or effective.metrics.eval_episodes
    greedy = effective.metrics.greedy if greedy is None else greedy
    names = list(effective.train.tasks)
    gtn_net = load_checkpoint(compare)
    base_samples = score_tasks(net, effective, names, episodes, eval_seed, greedy)
    gtn_samples = score_tasks(gtn_net, config, names, episodes, eval_seed, greedy)

    rows: List[List[Any]] = []
    deltas: List[float] = []
    for name in names:
        single = reference_scores[name]
        try:
            base_rfs: Optional[float] = rfs(base_samples[name].mean_adjusted, single)
            gtn_rfs: Optional[float] = rfs(gtn_samples[name].mean_adjusted, single)
            delta: Optional[float] = gtn_rfs - base_rfs
            deltas.append(delta)
        except UndefinedMetricError as e:
            logger.warning(str(e), extra={"task": name})
            base_rfs = gtn_rfs = delta = None
        rows.append([name, base_rfs, gtn_rfs, delta])

    reports.write_csv(
        recorder.artifact("comparison_csv", Artifact.COMPARISON_CSV),
        reports.COMPARISON_HEADER,
        rows,
    )
    mean_improvement = float(np.mean(deltas)) if deltas else None
    logger.info(
        "Baseline comparison done",
        extra={"compare": str(compare), "mean_improvement": mean_improvement},
    )
    return recorder.finish(
        **summary, compare=str(compare), mean_rfs_improvement=mean_improvement
    )


def tier_representatives(config: ExperimentConfig) -> Dict[int, TaskSpec]:
    """First roster task of every tier, in roster order."""
    by_tier: Dict[int, TaskSpec] = {}
    for spec in config.tasks.values():
        by_tier.setdefault(spec.tier, spec)
    return by_tier


def run_hierarchy(
    config: ExperimentConfig,
    out_dir: PathLike,
    episodes: Optional[int] = None,
    seeds: Optional[Sequence[int]] = None,
) -> RunManifest:
    """`hierarchy`: scores of every scripted tier policy on every task tier."""
    seeds = list(seeds or config.metrics.seeds)
    episodes = episodes or config.metrics.eval_episodes
    recorder = RunRecorder("hierarchy", out_dir, config, seeds[0])

    matrix = knowledge_matrix(tier_representatives(config), episodes, seeds)
    rows = [
        [task_tier, oracle_tier, score]
        for task_tier, row in matrix.items()
        for oracle_tier, score in row.items()
    ]
    reports.write_csv(
        recorder.artifact("knowledge_csv", Artifact.KNOWLEDGE_CSV), reports.KNOWLEDGE_HEADER, rows
    )
    holds = hierarchy_holds(matrix)
    if not holds:
        logger.warning("Knowledge hierarchy does not hold for this roster")
    return recorder.finish(episodes=episodes, seeds=seeds, hierarchy_holds=holds)
