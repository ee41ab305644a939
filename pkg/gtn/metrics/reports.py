# gtn/metrics/reports.py

"""CSV and JSON report writers.

Every CSV starts with a fixed header row; the headers below are the
documented schemas and are covered by golden tests.
"""

import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from gtn.core.domain import ScoreSample
from gtn.metrics.sweeps import RapsRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCORES_HEADER = [
    "task_id", "episodes", "greedy", "seed",
    "mean_raw", "std_raw", "baseline", "mean_adjusted", "ci95",
]
RFS_HEADER = ["task_id", "multi_adjusted", "single_adjusted", "rfs", "defined"]
ABLATION_HEADER = ["mode", "levels", "layers", "seeds", "mean_rfs", "undefined_tasks"]
COMPARISON_HEADER = ["task_id", "baseline_rfs", "gtn_rfs", "delta"]
KNOWLEDGE_HEADER = ["task_tier", "oracle_tier", "mean_score"]
RAPS_FIXED_HEADER = ["axis", "task_count", "episode", "seed", "defined", "clean_score"]


def raps_header(levels: int) -> List[str]:
    """RAPS CSV header for a network with `levels` levels."""
    return (
        RAPS_FIXED_HEADER
        + [f"aps_{m}" for m in range(1, levels + 1)]
        + [f"raps_{m}" for m in range(1, levels + 1)]
    )


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Writes a header row followed by `rows`; None becomes an empty cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"Row has {len(row)} cells, header has {len(header)}")
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.info("CSV report written", extra={"path": str(path), "rows": count})
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str))
    logger.info("JSON report written", extra={"path": str(path)})
    return path


def score_rows(samples: Iterable[ScoreSample]) -> List[List[Any]]:
    return [
        [
            s.task_id, s.episodes, s.greedy, s.seed,
            s.mean_raw, s.std_raw, s.baseline, s.mean_adjusted,
            s.ci95() if s.episodes > 1 else None,
        ]
        for s in samples
    ]


def score_dict(sample: ScoreSample) -> Dict[str, Any]:
    data = asdict(sample)
    data["ci95"] = sample.ci95() if sample.episodes > 1 else None
    return data


def raps_rows(rows: Iterable[RapsRow], levels: int) -> List[List[Any]]:
    out: List[List[Any]] = []
    for row in rows:
        report = row.report
        aps = list(report.aps) if report.aps else [None] * levels
        raps = list(report.raps) if report.raps is not None else [None] * levels
        out.append(
            [row.axis, row.task_count, row.episode, row.seed, row.defined, report.clean_score]
            + aps
            + raps
        )
    return out


def raps_json(
    rows: Sequence[RapsRow], trend: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Nested RAPS report: every measurement plus the trend statistic."""
    return {
        "measurements": [
            {
                "axis": r.axis,
                "task_count": r.task_count,
                "episode": r.episode,
                "seed": r.seed,
                "tasks": r.task_ids,
                "defined": r.defined,
                "aps": r.report.aps,
                "raps": r.report.raps,
                "clean_score": r.report.clean_score,
                "noisy_scores": r.report.noisy_scores,
                "metadata": r.report.metadata,
            }
            for r in rows
        ],
        "trend": dict(trend) if trend is not None else None,
    }
