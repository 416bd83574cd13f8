"""Logging utilities."""

import logging
import sys
from typing import Optional

# Level chosen on the command line; overrides Settings.LOG_LEVEL once set.
_override_level: Optional[int] = None


def _default_level() -> int:
    if _override_level is not None:
        return _override_level
    from config import Settings
    level = logging.getLevelName(Settings.LOG_LEVEL)
    return level if isinstance(level, int) else logging.INFO


class _StderrHandler(logging.StreamHandler):
    """StreamHandler writing to whatever sys.stderr is when a record is emitted."""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def get_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """Get a configured logger.

    Records go to stderr; stdout is reserved for JSON and CSV payloads.

    Args:
        name: Logger name
        level: Logging level (defaults to Settings.LOG_LEVEL)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = _StderrHandler()
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.propagate = False
        logger.setLevel(_default_level() if level is None else level)
    elif level is not None:
        logger.setLevel(level)

    return logger


def set_global_level(level: int) -> None:
    """Apply a level to every logger created through get_logger, now and later."""
    global _override_level
    _override_level = level
    for logger in logging.Logger.manager.loggerDict.values():
        if isinstance(logger, logging.Logger) and logger.handlers and not logger.propagate:
            logger.setLevel(level)
