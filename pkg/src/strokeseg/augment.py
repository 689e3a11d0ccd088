#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created paired flip/rotation augmentation applied identically to both stacks and the target
# - Rotations are exact right-angle turns drawn from AugmentConfig.rotation_choices
# - Added explicit Transform record with an exact inverse
#

"""Mask-consistent spatial augmentation for slice-stack samples."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .config import AugmentConfig
from .records import SampleRecord


@dataclass(frozen=True)
class Transform:
    """Flip choices followed by ``quarter_turns`` counter-clockwise 90 degree rotations."""

    hflip: bool = False
    vflip: bool = False
    quarter_turns: int = 0

    @property
    def is_identity(self) -> bool:
        return not self.hflip and not self.vflip and self.quarter_turns % 4 == 0


IDENTITY = Transform()


def draw_transform(rng: np.random.Generator, config: Optional[AugmentConfig] = None) -> Transform:
    """Sample flips and one rotation from the configured choices."""
    config = config or AugmentConfig()
    hflip = bool(rng.random() < config.p_hflip)
    vflip = bool(rng.random() < config.p_vflip)
    angle = int(config.rotation_choices[int(rng.integers(len(config.rotation_choices)))])
    return Transform(hflip=hflip, vflip=vflip, quarter_turns=(angle // 90) % 4)


def _apply(array: np.ndarray, transform: Transform) -> np.ndarray:
    # Axes 0 and 1 are (row, column); a trailing slice axis is never touched.
    out = array
    if transform.hflip:
        out = np.flip(out, axis=1)
    if transform.vflip:
        out = np.flip(out, axis=0)
    if transform.quarter_turns % 4:
        out = np.rot90(out, k=transform.quarter_turns % 4, axes=(0, 1))
    return np.ascontiguousarray(out)


def _invert(array: np.ndarray, transform: Transform) -> np.ndarray:
    out = array
    if transform.quarter_turns % 4:
        out = np.rot90(out, k=-(transform.quarter_turns % 4), axes=(0, 1))
    if transform.vflip:
        out = np.flip(out, axis=0)
    if transform.hflip:
        out = np.flip(out, axis=1)
    return np.ascontiguousarray(out)


def apply_transform(record: SampleRecord, transform: Transform) -> SampleRecord:
    """Apply one transform to dwi_stack, adc_stack and target alike."""
    return SampleRecord(
        case_id=record.case_id,
        center_slice=record.center_slice,
        dwi_stack=_apply(record.dwi_stack, transform),
        adc_stack=_apply(record.adc_stack, transform),
        target=_apply(record.target, transform),
    )


def invert_transform(record: SampleRecord, transform: Transform) -> SampleRecord:
    """Undo apply_transform exactly."""
    return SampleRecord(
        case_id=record.case_id,
        center_slice=record.center_slice,
        dwi_stack=_invert(record.dwi_stack, transform),
        adc_stack=_invert(record.adc_stack, transform),
        target=_invert(record.target, transform),
    )


def augment_sample(record: SampleRecord, rng: np.random.Generator, config: Optional[AugmentConfig] = None) -> SampleRecord:
    """Draw a transform and apply it to the record."""
    return augment_sample_with_transform(record, rng, config)[0]


def augment_sample_with_transform(record: SampleRecord, rng: np.random.Generator, config: Optional[AugmentConfig] = None) -> Tuple[SampleRecord, Transform]:
    """Like augment_sample but also returns the drawn transform."""
    transform = draw_transform(rng, config)
    return apply_transform(record, transform), transform


__all__ = [
    "Transform",
    "IDENTITY",
    "draw_transform",
    "apply_transform",
    "invert_transform",
    "augment_sample",
    "augment_sample_with_transform",
]
