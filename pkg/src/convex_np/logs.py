"""Logger configuration shared by the library and the command line."""
from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError

LOGGER_NAME = "convex_np"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def configure_logging(
    level: Union[int, str] = logging.WARNING,
    log_file: Optional[Union[str, Path]] = None,
) -> logging.Logger:
    """Configure the package logger and return it.

    Parameters
    ----------
    level:
        Level applied to the package logger (name or number).
    log_file:
        Optional path of a log file receiving the same records. Parent
        directories are created.

    Calling this repeatedly never stacks duplicate handlers.
    """
    logger = logging.getLogger(LOGGER_NAME)
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            raise ConfigError(f"Unknown log level {level!r}")
    logger.setLevel(level)
    logger.propagate = False

    has_console = any(
        isinstance(handler, logging.StreamHandler)
        and not isinstance(handler, logging.FileHandler)
        for handler in logger.handlers
    )
    if not has_console:
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(console)

    if log_file is not None:
        log_path = Path(log_file).resolve()
        log_path.parent.mkdir(parents=True, exist_ok=True)
        existing_file_handler_paths = {
            Path(getattr(handler, "baseFilename", ""))
            for handler in logger.handlers
            if isinstance(handler, logging.FileHandler)
        }
        if log_path not in existing_file_handler_paths:
            file_handler = logging.FileHandler(log_path, encoding="utf-8")
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            logger.addHandler(file_handler)

    return logger


__all__ = ["LOG_FORMAT", "LOGGER_NAME", "configure_logging"]
