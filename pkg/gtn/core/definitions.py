# gtn/core/definitions.py

"""Constants shared by environments, models, metrics and the CLI."""


class Action:
    """Shooter action indices. Indices >= 4 alias NOOP."""

    NOOP = 0
    SHOOT = 1
    LEFT = 2
    RIGHT = 3

    MIN_COUNT = 2
    MAX_COUNT = 18


class Cell:
    """Target grid cell codes."""

    EMPTY = 0
    GOOD = 1
    BAD = 2


class Gray:
    """Gray levels used when rendering observations."""

    BACKGROUND = 0.0
    AGENT = 0.3
    BAD_TARGET = 0.6
    GOOD_TARGET = 1.0


class Tier:
    """Knowledge tiers of the shooter family."""

    SHOOT = 1  # shoot continuously
    AIM = 2  # aim to targets, then shoot
    AIM_VALID = 3  # aim to valid targets, then shoot

    ALL = (SHOOT, AIM, AIM_VALID)


class ArchitectureTag:
    """Tags written into run manifests."""

    GTN = "GTN"
    BASELINE = "MT-A3C-surrogate"


class ExitCode:
    """Process exit codes of the CLI."""

    OK = 0
    CONFIG_ERROR = 2
    RUNTIME_ERROR = 3


class Artifact:
    """File names of run artifacts."""

    CONFIG = "config.yaml"
    CHECKPOINT = "model.gtn"
    CHECKPOINT_DIR = "checkpoints"
    CHECKPOINT_SIDECAR = "model.json"
    TRAINING_LOG = "training_log.jsonl"
    MANIFEST = "manifest.json"
    SCORES_CSV = "scores.csv"
    EVAL_REPORT = "eval_report.json"
    RFS_CSV = "rfs.csv"
    ABLATION_CSV = "ablation.csv"
    RAPS_CSV = "raps.csv"
    RAPS_REPORT = "raps_report.json"
    COMPARISON_CSV = "baseline_comparison.csv"
    KNOWLEDGE_CSV = "knowledge_matrix.csv"
