"""JSON logging configuration for the levy-hjmm toolkit."""

import json
import logging
import sys
from pathlib import Path
from typing import IO, Any, Dict, Optional

from levyhjmm.core.config import PROJECT_ROOT, config

# Structured fields copied from LogRecord extras when present.
EXTRA_FIELDS = (
    "subcommand",
    "spec",
    "seed",
    "path_index",
    "n_paths",
    "n_steps",
    "elapsed_ms",
    "exit_code",
)


class JSONFormatter(logging.Formatter):
    """Custom JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        for field in EXTRA_FIELDS:
            if hasattr(record, field):
                log_data[field] = getattr(record, field)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def configure_logging(level: Optional[str] = None, stream: Optional[IO[str]] = None) -> None:
    """Configure JSON logging on the root logger.

    Output goes to stderr so command data written to stdout stays parseable.
    """
    if level is None:
        logging_config_path = PROJECT_ROOT / "logging.json"
        level = config.log_level
        if logging_config_path.exists():
            with open(logging_config_path) as f:
                level = json.load(f).get("level", level)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(stream or sys.stderr)
    console_handler.setFormatter(JSONFormatter())
    root_logger.addHandler(console_handler)


def log_run(subcommand: str, spec: Optional[str], exit_code: int, elapsed_ms: float) -> None:
    """Log the completion of a CLI run with structured data."""
    logger = logging.getLogger(__name__)
    name = Path(spec).name if spec else "-"
    logger.info(
        f"{subcommand} {name} exit={exit_code}",
        extra={
            "subcommand": subcommand,
            "spec": spec,
            "exit_code": exit_code,
            "elapsed_ms": round(elapsed_ms, 3),
        },
    )
