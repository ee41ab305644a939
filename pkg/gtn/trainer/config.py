# gtn/trainer/config.py

"""Training run configuration using Pydantic."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from gtn.envs.shooter import TaskSpec


class TrainConfig(BaseModel):
    """Settings of one asynchronous multi-task training run.

    Worker i is pinned to task i mod len(tasks).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    tasks: List[TaskSpec] = Field(min_length=1)
    task_names: List[str] = Field(default_factory=list)
    workers: int = Field(default=1, ge=1)
    t_max: int = Field(default=20, ge=1, description="Rollout length before an update.")
    gamma: float = Field(default=0.99, gt=0.0, le=1.0)
    total_episodes: int = Field(default=100, ge=1, description="Episode budget of each task.")
    entropy_coeff: Optional[float] = Field(
        default=None, ge=0.0, description="Entropy bonus beta; None uses the model's."
    )
    lr: float = Field(default=7e-4, gt=0.0)
    decay: float = Field(default=0.99, ge=0.0, lt=1.0)
    rms_eps: float = Field(default=0.1, gt=0.0)
    epsilon: float = Field(
        default=0.0, ge=0.0, le=1.0, description="Probability of a uniform random action."
    )
    max_updates: Optional[int] = Field(default=None, ge=1)
    checkpoint_every: Optional[int] = Field(
        default=None, ge=1, description="Snapshot the global net every this many episodes."
    )
    seed: int = 0

    @model_validator(mode="after")
    def validate_layout(self) -> "TrainConfig":
        if self.task_names and len(self.task_names) != len(self.tasks):
            raise ValueError(
                f"{len(self.task_names)} task names for {len(self.tasks)} tasks"
            )
        if len(set(self.task_names)) != len(self.task_names):
            raise ValueError("task names must be unique")
        if self.workers < len(self.tasks):
            raise ValueError(
                f"{self.workers} workers cannot cover {len(self.tasks)} tasks; "
                "every task needs at least one pinned worker"
            )
        return self

    def names(self) -> List[str]:
        if self.task_names:
            return list(self.task_names)
        return [f"task{i}" for i in range(len(self.tasks))]

    def task_of_worker(self, worker: int) -> int:
        return worker % len(self.tasks)
