# tests/test_logging.py

import json
import logging
import sys

from gtn.logging_config import CommandFilter, StructuredFormatter, configure_logging


def make_record(**extra):
    logger = logging.getLogger("gtn.test")
    record = logger.makeRecord("gtn.test", logging.INFO, __file__, 10, "Worker started", (), None, extra=extra)
    return record


def test_record_renders_as_json_with_extra_fields():
    line = StructuredFormatter().format(make_record(worker=2, task="aim"))
    data = json.loads(line)
    assert data["message"] == "Worker started"
    assert data["level"] == "INFO"
    assert data["logger"] == "gtn.test"
    assert data["worker"] == 2
    assert data["task"] == "aim"
    assert "args" not in data and "msg" not in data


def test_exceptions_are_included():
    try:
        raise RuntimeError("boom")
    except RuntimeError:
        record = logging.getLogger("gtn.test").makeRecord(
            "gtn.test", logging.ERROR, __file__, 20, "Worker failed", (), sys.exc_info()
        )
    data = json.loads(StructuredFormatter().format(record))
    assert "RuntimeError: boom" in data["exception"]


def test_unserializable_extras_fall_back_to_str():
    data = json.loads(StructuredFormatter().format(make_record(path=object())))
    assert data["path"].startswith("<object object")


def test_command_filter_stamps_records_without_a_command():
    stamp = CommandFilter("train")
    record = make_record(worker=0)
    assert stamp.filter(record)
    assert json.loads(StructuredFormatter().format(record))["command"] == "train"

    explicit = make_record(command="eval")
    stamp.filter(explicit)
    assert explicit.command == "eval"


def test_configure_logging_replaces_root_handlers():
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    try:
        configure_logging("debug", command="raps")
        assert len(root.handlers) == 1
        handler = root.handlers[0]
        assert isinstance(handler.formatter, StructuredFormatter)
        assert any(isinstance(f, CommandFilter) for f in handler.filters)
        assert root.level == logging.DEBUG
    finally:
        root.handlers[:] = saved_handlers
        root.setLevel(saved_level)
        logging.captureWarnings(False)
