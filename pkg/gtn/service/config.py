# gtn/service/config.py

"""Process settings using Pydantic Settings.

Loads values from environment variables (prefix 'GTN_') or a .env file.
"""

from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Global process settings."""

    model_config = SettingsConfigDict(
        env_prefix="GTN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    out_dir: str = Field(
        default="runs", description="Default output directory of every subcommand."
    )
    log_level: str = Field(default="INFO", description="Root logging level.")
    checkpoint_precision: Literal["f64", "f32"] = Field(
        default="f64", description="Element type of saved checkpoints."
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure the level is one the logging module knows."""
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level


# Singleton settings instance
settings = Settings()
