# gtn/core/domain.py

"""Domain models passed between the engine, model, trainer and metrics layers."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class LstmState:
    """Recurrent state of one LSTM layer.

    Attributes:
        hidden: Hidden vector of length S
        cell: Cell vector of length S
    """

    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "LstmState":
        return cls(hidden=np.zeros(size), cell=np.zeros(size))

    def copy(self) -> "LstmState":
        return LstmState(hidden=self.hidden.copy(), cell=self.cell.copy())


@dataclass
class ForwardResult:
    """Output of one GTN forward step.

    Attributes:
        policies: Action-space size -> probability vector
        value: State value V
        new_recurrent: Updated LSTM state of every level
        level_activations: a_1..a_M as fed into the concatenation layer
        logits: Action-space size -> pre-softmax head output
        hidden: Concatenation layer activation H
    """

    policies: Dict[int, np.ndarray]
    value: float
    new_recurrent: List[LstmState]
    level_activations: List[np.ndarray]
    logits: Dict[int, np.ndarray] = field(default_factory=dict)
    hidden: Optional[np.ndarray] = None


@dataclass
class StepResult:
    """Result of one environment step."""

    observation: np.ndarray
    reward: float
    done: bool


@dataclass
class RolloutStep:
    """One stored experience {o_t, f_(t-1), a_t, r_t}.

    `reward` is the normalized reward used for training; `raw_reward` is
    the environment's reward before normalization.
    """

    observation: np.ndarray
    f_prev: List[LstmState]
    action: int
    reward: float
    raw_reward: float = 0.0


@dataclass
class RolloutBuffer:
    """Experiences gathered by one worker between two updates."""

    steps: List[RolloutStep] = field(default_factory=list)
    action_count: int = 0
    terminal: bool = False
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> List[float]:
        return [s.reward for s in self.steps]


@dataclass
class ScoreSample:
    """Scores of one agent on one task.

    Attributes:
        task_id: Roster name of the task
        episodes: Number of evaluated episodes
        mean_raw: Mean undiscounted episode score
        mean_adjusted: mean_raw minus the random-action baseline
        greedy: Whether actions were chosen greedily
        seed: Evaluation seed
        baseline: Random-action baseline that was subtracted
        std_raw: Standard deviation of episode scores
    """

    task_id: str
    episodes: int
    mean_raw: float
    mean_adjusted: float
    greedy: bool
    seed: int
    baseline: float = 0.0
    std_raw: float = 0.0

    def ci95(self) -> float:
        """Half-width of the normal-approximation 95% interval of the mean."""
        if self.episodes < 2:
            return float("inf")
        return 1.96 * self.std_raw / float(np.sqrt(self.episodes))


@dataclass
class SensitivityReport:
    """Per-level perturbation sensitivity of one network.

    RAPS is None when the APS values sum to zero or APS itself is undefined.
    """

    aps: List[float]
    raps: Optional[List[float]]
    clean_score: float
    noisy_scores: List[float]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def raps_defined(self) -> bool:
        return self.raps is not None


@dataclass
class RunManifest:
    """Provenance record written next to every run's artifacts."""

    command: str
    config_hash: str
    seed: int
    started_at: str
    finished_at: str = ""
    artifacts: Dict[str, str] = field(default_factory=dict)
    build: str = ""
    architecture: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)
