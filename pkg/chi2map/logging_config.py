"""
Logging setup for the chi2map command line and scripts.

The library itself only creates module loggers; handlers are installed here,
once, by the entry points.
"""

import logging
from typing import Optional

from chi2map.config import get_settings

LOGGER_NAME = "chi2map"

_HANDLER_ATTR = "_chi2map_handler"


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> logging.Logger:
    """
    Configure the package logger with a single stream handler.

    Args:
        level: Level name; defaults to ``Settings.LOG_LEVEL``
        fmt: Format string; defaults to ``Settings.LOG_FORMAT``

    Returns:
        logging.Logger: The configured ``chi2map`` logger

    Note:
        Calling this more than once replaces the level and format of the
        existing handler instead of stacking handlers.
    """
    settings = get_settings()
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel((level or settings.LOG_LEVEL).upper())

    formatter = logging.Formatter(fmt or settings.LOG_FORMAT)
    handler = next((h for h in logger.handlers if getattr(h, _HANDLER_ATTR, False)), None)
    if handler is None:
        handler = logging.StreamHandler()
        setattr(handler, _HANDLER_ATTR, True)
        logger.addHandler(handler)
    handler.setFormatter(formatter)
    return logger
