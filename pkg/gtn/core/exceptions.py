# gtn/core/exceptions.py

"""Custom exception hierarchy for the GTN experiment stack.

This module defines the specific error types used throughout the application
to differentiate between configuration, usage, persistence, training and
metric errors.
"""

from typing import List, Optional, Tuple

# (location, line, message); line is None when the source has no line info
Diagnostic = Tuple[str, Optional[int], str]


class GtnError(Exception):
    """Base exception for all application-specific errors."""

    pass


class ConfigurationError(GtnError):
    """Raised when configuration loading or validation fails."""

    def __init__(
        self, message: str, diagnostics: Optional[List[Diagnostic]] = None
    ) -> None:
        super().__init__(message)
        self.diagnostics: List[Diagnostic] = diagnostics or []


class UsageError(GtnError):
    """Raised when an API is called out of order or with incompatible arguments."""

    pass


class CheckpointError(GtnError):
    """Raised when a checkpoint cannot be written, read or audited."""

    pass


class TrainingError(GtnError):
    """Raised when a training worker fails and training is aborted."""

    def __init__(
        self, message: str, worker: Optional[int] = None, task: Optional[str] = None
    ) -> None:
        super().__init__(message)
        self.worker = worker
        self.task = task


class UndefinedMetricError(GtnError):
    """Raised when a metric has no meaningful value (e.g. RFS over a zero score)."""

    pass


class ReferenceScoresError(GtnError):
    """Raised when single-task reference scores are missing or unusable."""

    pass
