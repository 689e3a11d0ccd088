#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created CaseVolume dataclass for one subject's aligned DWI/ADC/mask volumes
# - Added BoundingBox3D with half-open bounds and slice helpers
# - Added SampleRecord holding per-modality slice stacks and the center-slice target
# - Added affine and spacing metadata to CaseVolume (read from NIfTI, not acted on)
# - Fixed type annotations for __iter__ and as_tuple methods
# - CaseVolume rejects non-binary masks and axes shorter than MIN_CASE_EXTENT
#

"""Data records shared across the strokeseg pipeline."""

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import DatasetError

Index3 = Tuple[int, int, int]

MIN_CASE_EXTENT = 3


@dataclass(eq=False)
class CaseVolume:
    """One subject's aligned DWI, ADC and lesion mask.

    All three arrays are indexed (H, W, D) with axial slices along the last axis.
    """

    case_id: str
    """Case identifier, also the case directory name on disk."""

    dwi: np.ndarray
    """Diffusion-weighted volume, float32, arbitrary intensity units."""

    adc: np.ndarray
    """Apparent diffusion coefficient volume, same shape as dwi."""

    mask: np.ndarray
    """Binary lesion mask (uint8, values 0/1), same shape as dwi."""

    affine: Optional[np.ndarray] = None
    """Voxel-to-world affine of the DWI file, if known."""

    spacing: Optional[Tuple[float, float, float]] = None
    """Voxel spacing in millimetres, if known."""

    def __post_init__(self) -> None:
        if self.dwi.ndim != 3:
            raise ValueError(f"case {self.case_id}: volumes must be 3D, got shape {self.dwi.shape}")
        if not (self.dwi.shape == self.adc.shape == self.mask.shape):
            raise ValueError(f"case {self.case_id}: shape mismatch dwi={self.dwi.shape} adc={self.adc.shape} mask={self.mask.shape}")
        if min(self.dwi.shape) < MIN_CASE_EXTENT:
            raise DatasetError(f"case {self.case_id}: every axis needs at least {MIN_CASE_EXTENT} voxels, got {self.dwi.shape}")
        if self.mask.dtype != np.bool_ and not np.isin(self.mask, (0, 1)).all():
            raise DatasetError(f"case {self.case_id}: mask must hold only 0 and 1")

    @property
    def shape(self) -> Index3:
        """Common (H, W, D) shape of the three volumes."""
        h, w, d = self.dwi.shape
        return (int(h), int(w), int(d))

    @property
    def depth(self) -> int:
        """Number of axial slices."""
        return self.shape[2]

    def __iter__(self) -> Iterator[np.ndarray]:
        """Allow ``dwi, adc, mask = case`` unpacking."""
        return iter((self.dwi, self.adc, self.mask))

    def as_tuple(self) -> Tuple[np.ndarray, ...]:
        """Convert to (dwi, adc, mask)."""
        return tuple(self)


@dataclass(frozen=True)
class BoundingBox3D:
    """Axis-aligned box with inclusive ``lo`` and exclusive ``hi`` corners."""

    lo: Index3
    hi: Index3

    def __post_init__(self) -> None:
        if len(self.lo) != 3 or len(self.hi) != 3:
            raise ValueError(f"bounding box corners must have three components, got lo={self.lo} hi={self.hi}")
        if any(a < 0 for a in self.lo) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"invalid bounding box lo={self.lo} hi={self.hi}")

    @property
    def shape(self) -> Index3:
        """Extent of the box along each axis."""
        return (self.hi[0] - self.lo[0], self.hi[1] - self.lo[1], self.hi[2] - self.lo[2])

    def fits(self, shape: Tuple[int, ...]) -> bool:
        """Return True if the box lies inside a volume of the given shape."""
        return len(shape) == 3 and all(b <= s for b, s in zip(self.hi, shape))

    def slices(self) -> Tuple[slice, slice, slice]:
        """Index expression selecting the box from a volume."""
        return (slice(self.lo[0], self.hi[0]), slice(self.lo[1], self.hi[1]), slice(self.lo[2], self.hi[2]))

    @classmethod
    def full(cls, shape: Tuple[int, ...]) -> "BoundingBox3D":
        """Box covering the full extent of a volume."""
        h, w, d = shape
        return cls((0, 0, 0), (int(h), int(w), int(d)))


@dataclass(eq=False)
class SampleRecord:
    """One training sample: S consecutive slices per modality and the center-slice mask."""

    case_id: str
    center_slice: int
    """Index of the center slice in the (cropped) source volume."""

    dwi_stack: np.ndarray
    """float32 array (H, W, S)."""

    adc_stack: np.ndarray
    """float32 array (H, W, S)."""

    target: np.ndarray
    """float32 array (H, W) holding 0.0/1.0."""

    def __post_init__(self) -> None:
        if self.dwi_stack.ndim != 3 or self.dwi_stack.shape != self.adc_stack.shape:
            raise ValueError(f"sample {self.name}: stacks must share an (H, W, S) shape, got dwi={self.dwi_stack.shape} adc={self.adc_stack.shape}")
        if self.target.shape != self.dwi_stack.shape[:2]:
            raise ValueError(f"sample {self.name}: target shape {self.target.shape} does not match stack plane {self.dwi_stack.shape[:2]}")

    @property
    def slices_per_modality(self) -> int:
        """S, the number of slices stacked per modality."""
        return int(self.dwi_stack.shape[2])

    @property
    def name(self) -> str:
        """File stem used for this sample, ``<case_id>_<center_slice>``."""
        return f"{self.case_id}_{self.center_slice}"

    def equals(self, other: "SampleRecord") -> bool:
        """Element-wise equality of metadata and all three tensors."""
        return (
            self.case_id == other.case_id
            and self.center_slice == other.center_slice
            and np.array_equal(self.dwi_stack, other.dwi_stack)
            and np.array_equal(self.adc_stack, other.adc_stack)
            and np.array_equal(self.target, other.target)
        )


__all__ = ["CaseVolume", "BoundingBox3D", "SampleRecord", "Index3"]
