# gtn/core/loader.py

"""Experiment configuration loader.

An experiment file is YAML with one section per module:

    format_version: 1
    model:   GtnConfig fields
    tasks:   roster, name -> TaskSpec fields
    train:   TrainConfig fields, `tasks` listing roster names
    metrics: evaluation settings

Unknown keys and invalid values are reported with their YAML line.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from gtn.core.exceptions import ConfigurationError, Diagnostic
from gtn.envs.shooter import TaskSpec
from gtn.model.config import GtnConfig
from gtn.trainer.config import TrainConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_EXPERIMENT = Path(__file__).parent / "experiment.yaml"

Location = Tuple[Union[str, int], ...]


class TrainSection(TrainConfig):
    """`train` block: TrainConfig with tasks given by roster name."""

    tasks: List[str] = Field(min_length=1)


class MetricsSection(BaseModel):
    """`metrics` block: evaluation and sweep settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eval_episodes: int = Field(default=20, ge=1)
    baseline_episodes: int = Field(default=100, ge=1)
    aps_episodes: int = Field(default=20, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    greedy: bool = True
    checkpoint_every: Optional[int] = Field(
        default=None, ge=1, description="Snapshot interval of the episode-axis RAPS sweep."
    )
    references: Optional[str] = Field(
        default=None, description="Single-task reference scores file for RFS."
    )


class ExperimentConfig(BaseModel):
    """One experiment: topology, task roster, training and metric settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    format_version: int = FORMAT_VERSION
    out_dir: Optional[str] = None
    model: GtnConfig = Field(default_factory=GtnConfig)
    tasks: Dict[str, TaskSpec]
    train: TrainSection
    metrics: MetricsSection = Field(default_factory=MetricsSection)

    def train_config(self, **overrides: Any) -> TrainConfig:
        """TrainConfig with roster names resolved, optionally overridden."""
        data = self.train.model_dump()
        data["task_names"] = list(self.train.tasks)
        data["tasks"] = [self.tasks[name] for name in self.train.tasks]
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return TrainConfig(**data)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid training overrides: {e}") from e

    def task_specs(self) -> List[TaskSpec]:
        return [self.tasks[name] for name in self.train.tasks]


def cross_validate(config: ExperimentConfig) -> List[Tuple[Location, str]]:
    """Checks that sections agree with each other."""
    problems: List[Tuple[Location, str]] = []
    if config.format_version != FORMAT_VERSION:
        problems.append(
            (("format_version",), f"unsupported format_version {config.format_version}")
        )
    seen = set()
    for i, name in enumerate(config.train.tasks):
        if name not in config.tasks:
            problems.append((("train", "tasks", i), f"unknown task '{name}'"))
        elif name in seen:
            problems.append((("train", "tasks", i), f"task '{name}' listed twice"))
        seen.add(name)
    if config.train.task_names:
        problems.append(
            (("train", "task_names"), "task names come from train.tasks; remove task_names")
        )
    for name, spec in config.tasks.items():
        if spec.action_count not in config.model.action_space_sizes:
            problems.append(
                (
                    ("tasks", name, "action_count"),
                    f"action_count {spec.action_count} not in model.action_space_sizes "
                    f"{config.model.action_space_sizes}",
                )
            )
        if spec.render_side != config.model.input_side:
            problems.append(
                (
                    ("tasks", name, "render_side"),
                    f"render_side {spec.render_side} != model.input_side {config.model.input_side}",
                )
            )
    return problems


def _node_line(root: Optional[yaml.Node], location: Location) -> Optional[int]:
    """1-based line of the deepest YAML node reachable along `location`."""
    node, line = root, None
    for part in location:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            match = None
            for key, value in node.value:
                if key.value == str(part):
                    match = (key, value)
                    break
            if match is None:
                return line
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                return line
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _dotted(location: Location) -> str:
    out = ""
    for part in location:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out or "<root>"


def _diagnostics(
    root: Optional[yaml.Node], problems: Sequence[Tuple[Location, str]]
) -> List[Diagnostic]:
    return [(_dotted(loc), _node_line(root, loc), msg) for loc, msg in problems]


def _pydantic_problems(error: ValidationError) -> List[Tuple[Location, str]]:
    problems = []
    for item in error.errors():
        location = tuple(item["loc"])
        if item["type"] == "extra_forbidden":
            message = f"unknown key '{location[-1]}'"
        else:
            message = item["msg"]
        problems.append((location, message))
    return problems


def parse_experiment(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parses and validates an experiment document.

    Raises:
        ConfigurationError: With one diagnostic per problem, each carrying
            the dotted key path and its YAML line.
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigurationError(
            f"Cannot parse {source}: {e}", [("<yaml>", line, str(e))]
        ) from e

    if not isinstance(data, dict):
        raise ConfigurationError(
            f"{source} must contain a mapping", [("<root>", None, "expected a mapping")]
        )
    return validate_experiment(data, source, root)


def validate_experiment(
    data: Dict[str, Any], source: str = "<overrides>", root: Optional[yaml.Node] = None
) -> ExperimentConfig:
    """Validates a plain mapping, including the cross-section checks.

    Raises:
        ConfigurationError: With diagnostics; lines are resolved through
            `root` when the mapping came from YAML.
    """
    try:
        config = ExperimentConfig(**data)
    except ValidationError as e:
        diagnostics = _diagnostics(root, _pydantic_problems(e))
        raise ConfigurationError(
            f"Invalid experiment config {source}: {len(diagnostics)} problem(s)", diagnostics
        ) from e

    problems = cross_validate(config)
    if problems:
        diagnostics = _diagnostics(root, problems)
        raise ConfigurationError(
            f"Inconsistent experiment config {source}: {len(diagnostics)} problem(s)",
            diagnostics,
        )
    return config


def load_experiment(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Loads an experiment file; the packaged default when `path` is None.

    Raises:
        ConfigurationError: If the file is missing or invalid.
    """
    config_path = Path(path) if path is not None else DEFAULT_EXPERIMENT
    if not config_path.exists():
        error_msg = f"Configuration file not found: {config_path}"
        logger.error(error_msg)
        raise ConfigurationError(error_msg, [(str(config_path), None, "file not found")])
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read {config_path}: {e}") from e

    config = parse_experiment(text, source=str(config_path))
    logger.info(
        "Experiment config loaded",
        extra={
            "config_path": str(config_path),
            "tasks": list(config.train.tasks),
            "levels": config.model.levels,
            "layers": config.model.layers,
        },
    )
    return config


def canonical_data(config: ExperimentConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json")


def canonical_yaml(config: ExperimentConfig) -> str:
    """Deterministic YAML rendering; parsing it back yields an equal config."""
    return yaml.safe_dump(canonical_data(config), sort_keys=True)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the sorted-key JSON form; independent of source key order."""
    encoded = json.dumps(canonical_data(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()
