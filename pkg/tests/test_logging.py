"""
Tests for Logging Middleware

Structured JSON lines and stage timing.
"""

import json
import logging

import pytest

from src.middleware.logging import JsonFormatter, configure_logging, new_run_id, stage_timer


class TestJsonFormatter:
    """Test one-object-per-line log rendering."""

    def test_extra_fields_are_kept(self):
        """Extra record fields become JSON keys; args are rendered into the message."""
        record = logging.makeLogRecord(
            {"name": "curvscope", "levelname": "INFO", "msg": "Stage %s", "args": ("kernel",)}
        )
        record.run_id = "abc"
        record.sigma2 = 0.5
        payload = json.loads(JsonFormatter().format(record))
        assert payload["message"] == "Stage kernel"
        assert payload["level"] == "INFO"
        assert payload["run_id"] == "abc"
        assert payload["sigma2"] == 0.5
        assert "args" not in payload


class TestStageTimer:
    """Test stage start, completion and failure records."""

    def test_completion_carries_result_fields(self, caplog):
        """The completion record carries timing and result fields."""
        caplog.set_level(logging.DEBUG, logger="src.middleware.logging")
        with stage_timer("kernel", "run1", n_points=5) as out:
            out["sigma2"] = 2.0
        done = [r for r in caplog.records if r.getMessage() == "Stage completed"]
        assert len(done) == 1
        assert done[0].stage == "kernel"
        assert done[0].run_id == "run1"
        assert done[0].sigma2 == 2.0
        assert done[0].n_points == 5
        assert done[0].duration_ms >= 0

    def test_failure_is_logged_and_reraised(self, caplog):
        """A failing stage logs an error and re-raises."""
        caplog.set_level(logging.INFO, logger="src.middleware.logging")
        with pytest.raises(RuntimeError):
            with stage_timer("spectral_decompose", "run2"):
                raise RuntimeError("eigh failed")
        failed = [r for r in caplog.records if r.getMessage() == "Stage failed"]
        assert failed[0].error == "eigh failed"
        assert failed[0].levelno == logging.ERROR

    def test_run_ids_are_short_and_distinct(self):
        """Run IDs are 12 characters and unique."""
        ids = {new_run_id() for _ in range(50)}
        assert len(ids) == 50
        assert all(len(i) == 12 for i in ids)


class TestConfigureLogging:
    """Test root handler setup."""

    def test_json_handler(self, restore_root_logger):
        """JSON logging installs the JSON formatter."""
        configure_logging("warning", json_logs=True)
        assert restore_root_logger.level == logging.WARNING
        assert isinstance(restore_root_logger.handlers[0].formatter, JsonFormatter)

    def test_text_handler(self, restore_root_logger):
        """Text logging installs one plain handler."""
        configure_logging("DEBUG")
        assert len(restore_root_logger.handlers) == 1
        assert not isinstance(restore_root_logger.handlers[0].formatter, JsonFormatter)
