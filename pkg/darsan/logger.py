"""
Logging for the DARSAN package.

One stdout handler lives on the ``darsan`` package logger; modules log
through children of it (``darsan.protocol``, ``darsan.sim``, ...) so every
line names its source while a single level switch covers them all.
"""

import logging
import sys
from typing import Optional

from .config import config

PACKAGE = "darsan"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _numeric(level: str) -> int:
    return getattr(logging, level.upper(), logging.INFO)


def setup_logger(name: str = PACKAGE, level: Optional[str] = None) -> logging.Logger:
    """
    Set up a logger with a single stdout handler.

    Args:
        name: Logger name
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL); defaults to
            ``DARSAN_LOG_LEVEL``

    Returns:
        Configured logger instance
    """
    configured = logging.getLogger(name)
    numeric = _numeric(level or config.LOG_LEVEL)
    configured.setLevel(numeric)

    # Re-setup must not stack handlers
    configured.handlers.clear()

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(numeric)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    configured.addHandler(handler)
    configured.propagate = False
    return configured


def get_logger(module: str) -> logging.Logger:
    """Child of the package logger for a module, e.g. ``get_logger(__name__)``"""
    suffix = module[len(PACKAGE) + 1 :] if module.startswith(PACKAGE + ".") else module
    return logger.getChild(suffix)


def set_level(level: str) -> None:
    """Change the level of the package logger and its handlers in place"""
    numeric = _numeric(level)
    logger.setLevel(numeric)
    for handler in logger.handlers:
        handler.setLevel(numeric)


logger = setup_logger(PACKAGE)
