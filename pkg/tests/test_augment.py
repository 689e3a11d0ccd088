#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created tests for paired flip/rotation augmentation
#

"""Tests for strokeseg.augment."""

import numpy as np
import pytest

from strokeseg.augment import IDENTITY, Transform, apply_transform, augment_sample, augment_sample_with_transform, draw_transform, invert_transform
from strokeseg.config import AugmentConfig
from strokeseg.records import SampleRecord


def _record(seed: int = 0, hw: int = 8, slices: int = 3) -> SampleRecord:
    rng = np.random.default_rng(seed)
    return SampleRecord(
        case_id="case000",
        center_slice=4,
        dwi_stack=rng.random((hw, hw, slices), dtype=np.float32),
        adc_stack=rng.random((hw, hw, slices), dtype=np.float32),
        target=(rng.random((hw, hw)) > 0.5).astype(np.float32),
    )


class TestTransforms:
    """Test fixed transforms."""

    def test_identity(self) -> None:
        """Test that the identity transform changes nothing."""
        record = _record()
        assert IDENTITY.is_identity
        assert apply_transform(record, IDENTITY).equals(record)

    def test_two_quarter_turns_equal_half_turn(self) -> None:
        """Test that two 90 degree turns equal one 180 degree turn."""
        record = _record(1)
        twice = apply_transform(apply_transform(record, Transform(quarter_turns=1)), Transform(quarter_turns=1))
        assert twice.equals(apply_transform(record, Transform(quarter_turns=2)))

    def test_hflip_moves_marker(self) -> None:
        """Test that a horizontal flip sends pixel (r, c) to (r, W-1-c) in every array."""
        hw = 8
        record = SampleRecord(
            case_id="case000",
            center_slice=1,
            dwi_stack=np.zeros((hw, hw, 1), dtype=np.float32),
            adc_stack=np.zeros((hw, hw, 1), dtype=np.float32),
            target=np.zeros((hw, hw), dtype=np.float32),
        )
        record.dwi_stack[2, 1, 0] = 1.0
        record.adc_stack[2, 1, 0] = 1.0
        record.target[2, 1] = 1.0
        flipped = apply_transform(record, Transform(hflip=True))
        for array in (flipped.dwi_stack[..., 0], flipped.adc_stack[..., 0], flipped.target):
            assert array[2, hw - 2] == 1.0
            assert array.sum() == 1.0

    def test_slice_axis_untouched(self) -> None:
        """Test that transforms never reorder the slice axis."""
        record = _record(2)
        out = apply_transform(record, Transform(hflip=True, vflip=True, quarter_turns=3))
        for k in range(3):
            assert np.array_equal(out.dwi_stack[..., k], np.rot90(record.dwi_stack[::-1, ::-1, k], 3))


class TestRandomAugmentation:
    """Test sampled augmentation."""

    def test_inverse_recovers_sample(self) -> None:
        """Test that inverting the drawn transform recovers stacks and target exactly."""
        rng = np.random.default_rng(11)
        for i in range(100):
            record = _record(i)
            augmented, transform = augment_sample_with_transform(record, rng)
            assert invert_transform(augmented, transform).equals(record)

    def test_target_follows_image(self) -> None:
        """Test that the target moves exactly like a marker burned into the image."""
        rng = np.random.default_rng(12)
        for i in range(50):
            record = _record(i)
            record.dwi_stack[..., 1] = record.target
            augmented = augment_sample(record, rng)
            assert np.array_equal(augmented.dwi_stack[..., 1], augmented.target)

    def test_seeded(self) -> None:
        """Test that equal generator seeds draw equal transforms."""
        a = [draw_transform(np.random.default_rng([5, i])) for i in range(20)]
        b = [draw_transform(np.random.default_rng([5, i])) for i in range(20)]
        assert a == b

    def test_disabled_probabilities(self) -> None:
        """Test that zero flip probability and a single 0 rotation give identity."""
        config = AugmentConfig(p_hflip=0.0, p_vflip=0.0, rotation_choices=(0,))
        rng = np.random.default_rng(0)
        assert all(draw_transform(rng, config).is_identity for _ in range(20))

    @pytest.mark.parametrize("angle,turns", [(90, 1), (180, 2), (270, 3)])
    def test_rotation_choice(self, angle: int, turns: int) -> None:
        """Test that a single allowed angle maps to the matching quarter turns."""
        config = AugmentConfig(p_hflip=0.0, p_vflip=0.0, rotation_choices=(angle,))
        assert draw_transform(np.random.default_rng(0), config) == Transform(quarter_turns=turns)
