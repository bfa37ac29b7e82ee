"""
Run-context filter that stamps every log record with the active run.

Simulation and analysis code logs through plain module loggers; the CLI
installs this filter once so records carry the spec path, seed and
subcommand without threading them through every call.
"""

import logging
from typing import Any, Dict, Optional


class RunContextFilter(logging.Filter):
    """Logging filter that attaches run metadata to records."""

    def __init__(self, name: str = "", **context: Any):
        """Initialize with the fields to stamp (None values are skipped)."""
        super().__init__(name)
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def update(self, **context: Any) -> None:
        """Merge additional fields into the context."""
        self.context.update({k: v for k, v in context.items() if v is not None})

    def filter(self, record: logging.LogRecord) -> bool:
        """
        Attach context fields the record does not already carry.

        Returns:
            True (always allows the record through, just annotates it)
        """
        for key, value in self.context.items():
            if not hasattr(record, key):
                setattr(record, key, value)
        return True


def install_run_context(logger_name: Optional[str] = None, **context: Any) -> RunContextFilter:
    """
    Install a run-context filter on every handler of a logger.

    Handler-level filters see records propagated from child loggers, which
    logger-level filters do not.

    Example:
        >>> install_run_context(spec="data/specs/vasicek.spec", seed=7)
    """
    logger = logging.getLogger(logger_name)
    run_filter = RunContextFilter(**context)
    if logger.handlers:
        for handler in logger.handlers:
            handler.addFilter(run_filter)
    else:
        logger.addFilter(run_filter)
    return run_filter
