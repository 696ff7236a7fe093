"""Centralized logging configuration for dtnlab using loguru."""

import os
import sys
from pathlib import Path
from typing import Optional

from loguru import logger


def setup_logging(log_level: Optional[str] = None) -> None:
    """Configure loguru logging for dtnlab.

    Console output goes to stderr so that CSV and JSON payloads written to
    stdout stay machine-readable.

    Args:
        log_level: Optional log level override. Defaults to the
            DTNLAB_LOG_LEVEL env var or WARNING.
    """
    # Remove default handler
    logger.remove()

    level = log_level or os.environ.get("DTNLAB_LOG_LEVEL", "WARNING")

    logger.add(
        sys.stderr,
        level=level,
        format="{level} | {message}",
    )

    if log_file := os.environ.get("DTNLAB_LOG_FILE"):
        logging_definitions(Path(log_file), level)


def logging_definitions(log_file: Path, level: str) -> None:
    """Add a rotating file sink next to the console sink."""
    log_file.parent.mkdir(parents=True, exist_ok=True)
    logger.add(
        log_file,
        level=level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}",
        rotation="1 MB",
        retention="10 days",
    )
    logger.debug(f"dtnlab logging to: {log_file}")


def get_logger():
    """Get the configured logger instance.

    Returns:
        loguru.Logger: Configured logger instance
    """
    return logger
