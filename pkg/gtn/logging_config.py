# gtn/logging_config.py

"""Structured JSON logging for training runs and experiment commands.

Every record becomes one JSON line on stderr, so stdout stays free for the
manifest path that `gtn` subcommands print.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

# Attributes every LogRecord carries; anything else came in through `extra=`.
_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}


def _record_fields(record: logging.LogRecord) -> Dict[str, Any]:
    return {
        "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
        "level": record.levelname,
        "logger": record.name,
        "message": record.getMessage(),
        "module": record.module,
        "function": record.funcName,
        "line": record.lineno,
        "thread": record.threadName,
    }


class StructuredFormatter(logging.Formatter):
    """Renders each record as one JSON object, `extra` fields included.

    Values json cannot encode (paths, numpy scalars) are written with str().
    """

    def format(self, record: logging.LogRecord) -> str:
        data = _record_fields(record)
        if record.exc_info:
            data["exception"] = self.formatException(record.exc_info)
        for key, value in vars(record).items():
            if key not in _RESERVED and key not in data:
                data[key] = value
        return json.dumps(data, default=str)


class CommandFilter(logging.Filter):
    """Stamps the running subcommand on every record that lacks one."""

    def __init__(self, command: str) -> None:
        super().__init__()
        self.command = command

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "command"):
            record.command = self.command
        return True


def configure_logging(level: str = "INFO", command: Optional[str] = None) -> None:
    """Installs the JSON handler on the root logger, replacing existing handlers.

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        command: Subcommand stamped on every record, when given
    """
    log_level = getattr(logging, level.upper(), logging.INFO)

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(log_level)
    handler.setFormatter(StructuredFormatter())
    if command:
        handler.addFilter(CommandFilter(command))

    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(log_level)
    root.addHandler(handler)
    logging.captureWarnings(True)

    logging.getLogger(__name__).debug(
        "Logging configured", extra={"log_level": level, "python_version": sys.version}
    )
