# gtn/cli.py

"""Command-line front door: train / eval / ablate / raps / baseline / hierarchy.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from gtn.core.definitions import Artifact, ExitCode
from gtn.core.exceptions import (
    CheckpointError,
    ConfigurationError,
    GtnError,
    ReferenceScoresError,
    TrainingError,
    UsageError,
)
from gtn.core.loader import load_experiment
from gtn.logging_config import configure_logging
from gtn.service import experiments
from gtn.service.config import settings

logger = logging.getLogger(__name__)


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else Path(settings.out_dir) / args.command


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment YAML (default: the packaged experiment)")
    parser.add_argument("--out", help="Output directory (default: $GTN_OUT_DIR/<command>)")


def _training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Override train.seed")
    parser.add_argument("--workers", type=int, help="Override train.workers")
    parser.add_argument(
        "--checkpoint-every", type=int, help="Checkpoint every this many finished episodes"
    )


def _evaluation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--episodes", type=int, help="Evaluation episodes per task")
    parser.add_argument(
        "--greedy",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Greedy (argmax) or sampled evaluation actions",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtn", description="Generalization Tower Network experiments at desk scale."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train one GTN on the configured tasks")
    _common(p)
    _training(p)

    p = sub.add_parser("eval", help="Score a checkpoint and compute RFS")
    p.add_argument("checkpoint", help="Checkpoint file written by train")
    _common(p)
    _evaluation(p)
    p.add_argument("--seed", type=int, help="Evaluation seed")
    p.add_argument(
        "--reference",
        action="append",
        help="Single-task eval output (dir, manifest or eval_report.json); repeatable",
    )

    p = sub.add_parser("ablate", help="RFS over a grid of levels M and layers N")
    _common(p)
    _evaluation(p)
    p.add_argument("--levels", type=int, nargs="+", required=True, help="M values")
    p.add_argument("--layers", type=int, nargs="+", required=True, help="N values")
    p.add_argument("--seeds", type=int, nargs="+", help="Seeds (default: metrics.seeds)")

    p = sub.add_parser("raps", help="RAPS per level across task counts or training progress")
    _common(p)
    _evaluation(p)
    p.add_argument("--task-counts", type=int, nargs="+", help="Numbers of tasks to train on")
    p.add_argument("--seeds", type=int, nargs="+", help="Seeds (default: metrics.seeds)")
    p.add_argument(
        "--episode-axis", action="store_true", help="Sweep training progress instead of task count"
    )
    p.add_argument("--checkpoint-every", type=int, help="Snapshot interval for --episode-axis")

    p = sub.add_parser("baseline", help="Train the single-level baseline surrogate")
    _common(p)
    _training(p)
    _evaluation(p)
    p.add_argument("--compare", help="GTN checkpoint to compare against")
    p.add_argument("--reference", action="append", help="Single-task eval output; repeatable")

    p = sub.add_parser("hierarchy", help="Score every scripted tier policy on every task tier")
    _common(p)
    p.add_argument("--episodes", type=int, help="Episodes per seed")
    p.add_argument("--seeds", type=int, nargs="+", help="Seeds (default: metrics.seeds)")

    return parser


def _dispatch(args: argparse.Namespace):
    config = load_experiment(args.config)
    out = _out_dir(args)
    if args.command == "train":
        return experiments.run_train(config, out, args.seed, args.workers, args.checkpoint_every)
    if args.command == "eval":
        return experiments.run_eval(
            args.checkpoint, config, out, args.episodes, args.seed, args.greedy, args.reference
        )
    if args.command == "ablate":
        return experiments.run_ablate(
            config, out, args.levels, args.layers, args.seeds, args.episodes, args.greedy
        )
    if args.command == "raps":
        return experiments.run_raps(
            config,
            out,
            args.task_counts,
            args.seeds,
            args.episodes,
            args.greedy,
            args.episode_axis,
            args.checkpoint_every,
        )
    if args.command == "baseline":
        return experiments.run_baseline(
            config,
            out,
            args.seed,
            args.workers,
            args.checkpoint_every,
            args.compare,
            args.reference,
            args.episodes,
            args.greedy,
        )
    return experiments.run_hierarchy(config, out, args.episodes, args.seeds)


def _report_configuration_error(error: ConfigurationError, source: str) -> None:
    print(f"error: {error}", file=sys.stderr)
    for location, line, message in error.diagnostics:
        where = f"{source}:{line}" if line is not None else source
        print(f"{where}: {location}: {message}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one subcommand and returns its exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(settings.log_level, command=args.command)
    source = args.config or "<packaged experiment.yaml>"

    try:
        manifest = _dispatch(args)
    except ConfigurationError as e:
        logger.error("Configuration error", extra={"diagnostics": e.diagnostics})
        _report_configuration_error(e, source)
        return ExitCode.CONFIG_ERROR
    except ReferenceScoresError as e:
        logger.error("Reference scores unavailable")
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.CONFIG_ERROR
    except TrainingError as e:
        logger.error("Training aborted", extra={"worker": e.worker, "task": e.task})
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.RUNTIME_ERROR
    except (UsageError, CheckpointError, GtnError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.RUNTIME_ERROR

    print(_out_dir(args) / Artifact.MANIFEST)
    logger.info(
        "Command finished",
        extra={"command": args.command, "config_hash": manifest.config_hash},
    )
    return ExitCode.OK


if __name__ == "__main__":
    sys.exit(main())
