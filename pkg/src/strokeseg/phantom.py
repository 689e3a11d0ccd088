#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created PhantomSpec and seed-indexed synthetic case generation
# - Background is a super-Gaussian pseudo-brain, zero outside an ellipsoidal support
# - Lesions are random ellipsoids inside the support: bright on DWI, dark on ADC
# - Added sample_lesions so tests can rebuild the exact lesion geometry
# - Added write_phantom_dataset producing the on-disk dataset layout
#

"""Synthetic DWI/ADC/mask phantoms with known ellipsoidal lesions."""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .logs import get_logger
from .records import CaseVolume
from .volume_io import save_case

logger = get_logger(__name__)

PathLike = Union[str, Path]

MIN_SHAPE = (16, 16, 8)
SUPPORT_FRACTION = 0.45
LESION_CENTER_FRACTION = 0.5
DWI_BASE_INTENSITY = 100.0
ADC_BASE_INTENSITY = 120.0


@dataclass
class PhantomSpec:
    """Parameters of a synthetic dataset."""

    n_cases: int = 20
    shape: Tuple[int, int, int] = (48, 48, 16)
    lesion_count_range: Tuple[int, int] = (1, 3)
    lesion_radius_range: Tuple[float, float] = (2.0, 5.0)
    dwi_lesion_contrast: float = 80.0
    adc_lesion_contrast: float = -60.0
    noise_sigma: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.shape = (int(self.shape[0]), int(self.shape[1]), int(self.shape[2]))
        self.lesion_count_range = (int(self.lesion_count_range[0]), int(self.lesion_count_range[1]))
        self.lesion_radius_range = (float(self.lesion_radius_range[0]), float(self.lesion_radius_range[1]))
        self.validate()

    def validate(self) -> None:
        if self.n_cases < 1:
            raise ValueError(f"n_cases must be >= 1, got {self.n_cases}")
        if any(s < m for s, m in zip(self.shape, MIN_SHAPE)):
            raise ValueError(f"shape must be at least {MIN_SHAPE}, got {self.shape}")
        lo, hi = self.lesion_count_range
        if lo < 0 or hi < lo:
            raise ValueError(f"lesion_count_range must be a non-empty range of counts, got {self.lesion_count_range}")
        rlo, rhi = self.lesion_radius_range
        if rlo <= 0 or rhi < rlo:
            raise ValueError(f"lesion_radius_range must be a non-empty positive range, got {self.lesion_radius_range}")
        if self.dwi_lesion_contrast <= 0:
            raise ValueError(f"dwi_lesion_contrast must be > 0, got {self.dwi_lesion_contrast}")
        if self.adc_lesion_contrast >= 0:
            raise ValueError(f"adc_lesion_contrast must be < 0, got {self.adc_lesion_contrast}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("shape", "lesion_count_range", "lesion_radius_range"):
            data[key] = list(data[key])
        return data


@dataclass(frozen=True)
class Lesion:
    """Axis-aligned ellipsoid in voxel coordinates."""

    center: Tuple[float, float, float]
    radii: Tuple[float, float, float]

    def contains(self, i: float, j: float, k: float) -> bool:
        """Ellipsoid inequality for a single voxel."""
        return sum(((p - c) / r) ** 2 for p, c, r in zip((i, j, k), self.center, self.radii)) <= 1.0


def case_id_for(index: int) -> str:
    return f"case{index:03d}"


def _rng(spec: PhantomSpec, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, index])


def _grid(shape: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.meshgrid(*(np.arange(s, dtype=np.float64) for s in shape), indexing="ij")


def _support_geometry(shape: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray]:
    center = (np.asarray(shape, dtype=np.float64) - 1.0) / 2.0
    semi_axes = SUPPORT_FRACTION * np.asarray(shape, dtype=np.float64)
    return center, semi_axes


def sample_lesions(spec: PhantomSpec, index: int) -> List[Lesion]:
    """Draw the lesion ellipsoids of case ``index``; the same draw generate_case uses."""
    rng = _rng(spec, index)
    center, semi_axes = _support_geometry(spec.shape)
    count = int(rng.integers(spec.lesion_count_range[0], spec.lesion_count_range[1] + 1))
    lesions = []
    for _ in range(count):
        direction = rng.normal(size=3)
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        reach = LESION_CENTER_FRACTION * float(rng.uniform()) ** (1.0 / 3.0)
        lesion_center = center + direction * reach * semi_axes
        radii = rng.uniform(spec.lesion_radius_range[0], spec.lesion_radius_range[1], size=3)
        lesions.append(Lesion(center=tuple(float(c) for c in lesion_center), radii=tuple(float(r) for r in radii)))  # type: ignore[arg-type]
    return lesions


def generate_case(spec: PhantomSpec, index: int) -> CaseVolume:
    """Build case ``index`` of the phantom dataset; fully determined by (seed, index).

    Raises:
        IndexError: If index is outside [0, n_cases)
    """
    if not 0 <= index < spec.n_cases:
        raise IndexError(f"phantom index {index} outside [0, {spec.n_cases})")

    lesions = sample_lesions(spec, index)
    # Noise uses its own stream so lesion geometry does not depend on noise_sigma.
    noise_rng = np.random.default_rng([spec.seed, index, 1])

    ii, jj, kk = _grid(spec.shape)
    center, semi_axes = _support_geometry(spec.shape)
    r2 = ((ii - center[0]) / semi_axes[0]) ** 2 + ((jj - center[1]) / semi_axes[1]) ** 2 + ((kk - center[2]) / semi_axes[2]) ** 2
    support = r2 <= 1.0
    brain = np.exp(-(r2**4)) * support

    mask = np.zeros(spec.shape, dtype=bool)
    for lesion in lesions:
        inside = ((ii - lesion.center[0]) / lesion.radii[0]) ** 2 + ((jj - lesion.center[1]) / lesion.radii[1]) ** 2 + ((kk - lesion.center[2]) / lesion.radii[2]) ** 2 <= 1.0
        mask |= inside
    mask &= support

    dwi = DWI_BASE_INTENSITY * brain + spec.dwi_lesion_contrast * mask
    adc = ADC_BASE_INTENSITY * brain + spec.adc_lesion_contrast * mask
    if spec.noise_sigma > 0:
        dwi = dwi + noise_rng.normal(0.0, spec.noise_sigma, size=spec.shape)
        adc = adc + noise_rng.normal(0.0, spec.noise_sigma, size=spec.shape)
    dwi = np.clip(dwi, 0.0, None) * support
    adc = np.clip(adc, 0.0, None) * support

    return CaseVolume(
        case_id=case_id_for(index),
        dwi=dwi.astype(np.float32),
        adc=adc.astype(np.float32),
        mask=mask.astype(np.uint8),
        affine=np.eye(4),
        spacing=(1.0, 1.0, 1.0),
    )


def write_phantom_dataset(spec: PhantomSpec, dataset_root: PathLike) -> List[str]:
    """Write every phantom case under ``dataset_root``.

    Returns:
        The written case IDs
    """
    root = Path(dataset_root)
    root.mkdir(parents=True, exist_ok=True)
    case_ids = []
    for index in range(spec.n_cases):
        case = generate_case(spec, index)
        save_case(case, root)
        case_ids.append(case.case_id)
        logger.debug("phantom %s: %d lesion voxels", case.case_id, int(case.mask.sum()))
    logger.info("wrote %d phantom cases to %s", len(case_ids), root)
    return case_ids


__all__ = ["PhantomSpec", "Lesion", "sample_lesions", "generate_case", "write_phantom_dataset", "case_id_for"]
