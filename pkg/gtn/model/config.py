# gtn/model/config.py

"""GTN topology configuration using Pydantic."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gtn.core.definitions import Action


class GtnConfig(BaseModel):
    """Topology and head layout of one Generalization Tower Network.

    `levels` is M (vertical streams) and `layers` is N (convolutions per
    horizontal stream). Defaults reproduce the 42x42, M=N=4, 32-kernel,
    288-unit network.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    levels: int = Field(default=4, ge=1, description="Number of levels M.")
    layers: int = Field(default=4, ge=1, description="Conv layers per level N.")
    channels: int = Field(default=32, ge=1, description="Kernels per conv layer.")
    kernel: int = Field(default=3, ge=1, description="Square kernel side.")
    stride: int = Field(default=2, ge=1, description="Convolution stride.")
    lstm_size: int = Field(default=288, ge=1, description="LSTM width S.")
    concat_size: int = Field(default=288, ge=1, description="Concatenation width A.")
    input_side: int = Field(default=42, ge=1, description="Observation side length.")
    action_space_sizes: List[int] = Field(
        default_factory=lambda: [2, 4, 6],
        description="Distinct action counts; one policy head per size.",
    )
    entropy_coeff: float = Field(default=0.01, ge=0.0, description="Entropy bonus beta.")
    level_layers: Optional[List[int]] = Field(
        default=None,
        description="Per-level conv counts for tapered towers; None means N everywhere.",
    )

    @field_validator("action_space_sizes")
    @classmethod
    def validate_action_sizes(cls, v: List[int]) -> List[int]:
        """Ensure at least one head and every size in the supported range."""
        if not v:
            raise ValueError("action_space_sizes must not be empty")
        if len(set(v)) != len(v):
            raise ValueError(f"action_space_sizes must be distinct, got {v}")
        for size in v:
            if not Action.MIN_COUNT <= size <= Action.MAX_COUNT:
                raise ValueError(
                    f"action space size {size} outside [{Action.MIN_COUNT}, {Action.MAX_COUNT}]"
                )
        return sorted(v)

    @model_validator(mode="after")
    def validate_level_layers(self) -> "GtnConfig":
        if self.level_layers is not None:
            if len(self.level_layers) != self.levels:
                raise ValueError(
                    f"level_layers has {len(self.level_layers)} entries for {self.levels} levels"
                )
            if any(n < 1 for n in self.level_layers):
                raise ValueError("every level needs at least one conv layer")
        return self

    def layers_at(self, level: int) -> int:
        """Conv count of a 1-indexed level."""
        if self.level_layers is not None:
            return self.level_layers[level - 1]
        return self.layers

    def with_changes(self, **changes) -> "GtnConfig":
        """Returns a validated copy with some fields replaced."""
        data = self.model_dump()
        data.update(changes)
        if "levels" in changes and "level_layers" not in changes:
            data["level_layers"] = None
        return GtnConfig(**data)
