#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created exception hierarchy shared by all strokeseg modules
# - Subclasses also inherit the closest builtin so callers can catch either
#

"""Exceptions raised by strokeseg."""


class StrokeSegError(Exception):
    """Base class for all strokeseg errors."""


class DatasetError(StrokeSegError, ValueError):
    """A dataset root or case on disk is missing files or holds invalid volumes."""


class SplitError(StrokeSegError, ValueError):
    """Split ratios or case counts do not allow a valid train/val/test partition."""


class SampleFormatError(StrokeSegError, ValueError):
    """A sample container is corrupted or does not match its header."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ModelConfigError(StrokeSegError, ValueError):
    """A ModelConfig violates one of its invariants."""


class ConfigError(StrokeSegError, ValueError):
    """A layered run configuration holds unknown keys or invalid values."""


class TrainingError(StrokeSegError, RuntimeError):
    """Training cannot start or had to abort."""


class UsageError(StrokeSegError):
    """The command line was used incorrectly."""


__all__ = [
    "StrokeSegError",
    "DatasetError",
    "SplitError",
    "SampleFormatError",
    "ModelConfigError",
    "ConfigError",
    "TrainingError",
    "UsageError",
]
