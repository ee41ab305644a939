# gtn/metrics/sensitivity.py

"""Per-level perturbation sensitivity (APS), its normalization (RAPS),
and the knowledge-tier score matrix of the scripted policies."""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from gtn.core.domain import SensitivityReport
from gtn.core.exceptions import UndefinedMetricError, UsageError
from gtn.envs.policies import scripted_mean_score
from gtn.envs.shooter import TaskSpec
from gtn.metrics.scoring import episode_score
from gtn.model.network import GtnNetwork, set_level_noise

logger = logging.getLogger(__name__)

APS_DENOMINATOR_FLOOR = 1e-9


def mean_adjusted_score(
    net: GtnNetwork,
    specs: Sequence[TaskSpec],
    episodes: int,
    seed: int,
    greedy: bool = True,
) -> float:
    """Baseline-adjusted score averaged over episodes and the task set."""
    samples = [episode_score(net, spec, episodes, greedy=greedy, seed=seed) for spec in specs]
    return float(np.mean([s.mean_adjusted for s in samples]))


def _noise_rng(seed: int, level: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, level]))


def noisy_score(
    net: GtnNetwork,
    specs: Sequence[TaskSpec],
    level: int,
    episodes: int,
    seed: int,
    greedy: bool = True,
) -> float:
    """Mean adjusted score with N(0,1) noise on a_level, re-sampled every step."""
    set_level_noise(net, level, True, _noise_rng(seed, level))
    try:
        return mean_adjusted_score(net, specs, episodes, seed, greedy)
    finally:
        set_level_noise(net, level, False)


def aps_from_scores(clean: float, noisy: float) -> float:
    """clamp((clean - noisy) / max(clean, 1e-9), 0, 1).

    Raises:
        UndefinedMetricError: If clean <= 0.
    """
    if clean <= 0:
        raise UndefinedMetricError(
            f"APS undefined: clean adjusted score {clean} is not positive"
        )
    return float(np.clip((clean - noisy) / max(clean, APS_DENOMINATOR_FLOOR), 0.0, 1.0))


def aps(
    net: GtnNetwork,
    specs: Sequence[TaskSpec],
    level: int,
    episodes: int,
    seed: int,
    greedy: bool = True,
    clean_score: Optional[float] = None,
) -> float:
    """Average perturbation sensitivity of one level.

    Clean and noisy runs replay the same episode layouts.

    Args:
        net: Network whose levels are perturbed
        specs: Task set the score is averaged over
        level: 1-indexed level receiving noise
        episodes: Episodes per task
        seed: Evaluation seed
        greedy: Greedy (default) or sampled actions
        clean_score: Precomputed clean score of the same evaluation

    Raises:
        UsageError: If the level is out of range.
        UndefinedMetricError: If the clean score is not positive.
    """
    if not 1 <= level <= net.config.levels:
        raise UsageError(f"Level {level} outside 1..{net.config.levels}")
    if clean_score is None:
        clean_score = mean_adjusted_score(net, specs, episodes, seed, greedy)
    noisy = noisy_score(net, specs, level, episodes, seed, greedy)
    return aps_from_scores(clean_score, noisy)


def raps(aps_vector: Sequence[float]) -> Optional[List[float]]:
    """Each APS divided by their sum; None when the sum is zero.

    Raises:
        ValueError: If an entry is negative.
    """
    values = np.asarray(aps_vector, dtype=np.float64)
    if np.any(values < 0):
        raise ValueError(f"APS entries must be >= 0, got {list(aps_vector)}")
    total = values.sum()
    if total <= 0:
        return None
    return (values / total).tolist()


def sensitivity_report(
    net: GtnNetwork,
    specs: Sequence[TaskSpec],
    episodes: int,
    seed: int,
    greedy: bool = True,
    task_ids: Optional[Sequence[str]] = None,
) -> SensitivityReport:
    """APS of every level plus RAPS for one network.

    When the clean score is not positive the APS entries are None, RAPS is
    None and `metadata["aps_undefined"]` is set.
    """
    clean = mean_adjusted_score(net, specs, episodes, seed, greedy)
    metadata = {
        "tasks": list(task_ids) if task_ids else [f"task{i}" for i in range(len(specs))],
        "episodes": episodes,
        "seed": seed,
        "greedy": greedy,
        "aps_undefined": clean <= 0,
    }
    levels = range(1, net.config.levels + 1)
    if clean <= 0:
        logger.warning(
            "APS undefined for an unlearned network",
            extra={"clean_score": clean, "seed": seed},
        )
        return SensitivityReport(
            aps=[None] * net.config.levels,
            raps=None,
            clean_score=clean,
            noisy_scores=[],
            metadata=metadata,
        )

    noisy = [noisy_score(net, specs, m, episodes, seed, greedy) for m in levels]
    aps_vector = [aps_from_scores(clean, s) for s in noisy]
    report = SensitivityReport(
        aps=aps_vector,
        raps=raps(aps_vector),
        clean_score=clean,
        noisy_scores=noisy,
        metadata=metadata,
    )
    logger.info(
        "Sensitivity measured",
        extra={"aps": aps_vector, "raps": report.raps, "clean_score": clean},
    )
    return report


def knowledge_matrix(
    specs_by_tier: Mapping[int, TaskSpec], episodes: int, seeds: Sequence[int]
) -> Dict[int, Dict[int, float]]:
    """Mean score of every scripted tier policy on every task tier.

    Returns:
        matrix[task_tier][oracle_tier] = score averaged over seeds
    """
    matrix: Dict[int, Dict[int, float]] = {}
    for task_tier, spec in sorted(specs_by_tier.items()):
        matrix[task_tier] = {
            oracle_tier: float(
                np.mean([scripted_mean_score(spec, oracle_tier, episodes, s) for s in seeds])
            )
            for oracle_tier in sorted(specs_by_tier)
        }
    return matrix


def hierarchy_holds(matrix: Mapping[int, Mapping[int, float]]) -> bool:
    """True when on every task tier k its own oracle beats every lower tier j < k."""
    return all(
        row[k] > row[j] for k, row in matrix.items() for j in row if j < k
    )
