#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created rich-based logging setup for the strokeseg logger tree
# - configure_logging replaces its own handler instead of stacking a new one
#

"""Logging helpers. Everything logs under the ``strokeseg`` logger."""

import logging
from typing import Optional, Union

from rich.console import Console
from rich.logging import RichHandler

ROOT_LOGGER_NAME = "strokeseg"
_HANDLER_NAME = "strokeseg-rich"


def get_logger(name: str) -> logging.Logger:
    """Return a logger below the ``strokeseg`` namespace.

    Args:
        name: Usually ``__name__`` of the calling module

    Returns:
        The logger instance
    """
    if name == ROOT_LOGGER_NAME or name.startswith(ROOT_LOGGER_NAME + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")


def configure_logging(level: Union[int, str] = logging.INFO, console: Optional[Console] = None) -> logging.Logger:
    """Install a single RichHandler writing to standard error.

    Calling this again swaps the handler and level, it never adds a second one.

    Args:
        level: Logging level name or number
        console: Console to write to (defaults to a stderr console)

    Returns:
        The configured ``strokeseg`` logger
    """
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown log level: {level}")
        level = resolved

    logger = logging.getLogger(ROOT_LOGGER_NAME)
    for handler in list(logger.handlers):
        if handler.get_name() == _HANDLER_NAME:
            logger.removeHandler(handler)

    handler = RichHandler(console=console or Console(stderr=True), show_path=False, rich_tracebacks=False, markup=False)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger


__all__ = ["get_logger", "configure_logging", "ROOT_LOGGER_NAME"]
