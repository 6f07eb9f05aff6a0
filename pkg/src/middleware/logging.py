"""
Logging Middleware

Run ID tracking, stage timing and structured logging around every pipeline stage.
"""

import json
import logging
import sys
import time
import uuid
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

logger = logging.getLogger(__name__)

# Attributes every LogRecord has; anything else came in through `extra=`.
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonFormatter(logging.Formatter):
    """One JSON object per line, extra fields included."""

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "time": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED:
                payload[key] = value
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def new_run_id() -> str:
    """Short identifier tying together the log lines of one run."""
    return uuid.uuid4().hex[:12]


@contextmanager
def stage_timer(stage: str, run_id: Optional[str] = None, **fields: Any) -> Iterator[Dict[str, Any]]:
    """
    Log start, completion (with duration) or failure of a pipeline stage.

    Yields a dict the caller may fill with result fields; they are logged on completion.

    Args:
        stage: Stage name, e.g. "spectral_decompose"
        run_id: Identifier shared by all stages of one run
        **fields: Extra structured fields (n_points, nn, ...)
    """
    run_id = run_id or new_run_id()
    base = {"run_id": run_id, "stage": stage, **fields}
    logger.debug("Stage started", extra=base)

    start_time = time.perf_counter()
    result_fields: Dict[str, Any] = {}
    try:
        yield result_fields
    except Exception as e:
        duration = time.perf_counter() - start_time
        logger.error(
            "Stage failed",
            extra={**base, "duration_ms": round(duration * 1000, 2), "error": str(e)},
        )
        raise

    duration = time.perf_counter() - start_time
    logger.info(
        "Stage completed",
        extra={**base, **result_fields, "duration_ms": round(duration * 1000, 2)},
    )


def configure_logging(log_level: str = "INFO", json_logs: bool = False) -> None:
    """
    Configure structured logging for the application.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        json_logs: If True, output logs in JSON format (for machine consumption)
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))

    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, log_level.upper()))

    logger.debug(f"Logging configured at {log_level} level")
