#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created per-volume min-max normalization (zero range maps to all zeros)
# - Added DWI-derived bounding box and identical cropping of DWI, ADC and mask
# - Added slice-stack extraction with first/last slice exclusion for S=3 and low-signal filter
# - Resize to 128x128 after stacking: bilinear for images, nearest-exact for masks
# - Added prepare_case/preprocess_case composition and threaded per-split preprocessing
# - Crop keeps the affine consistent by shifting its translation to the box corner
# - Sample center_slice is recorded in original-volume coordinates (crop offset added)
#

"""Volume preprocessing: normalize, crop, stack slices, resize."""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from .config import INPUT_HW, PreprocessConfig
from .errors import DatasetError
from .logs import get_logger
from .records import BoundingBox3D, CaseVolume, SampleRecord
from .sample_io import sample_filename, write_index, write_sample
from .volume_io import SplitManifest, SPLIT_NAMES, load_case

logger = get_logger(__name__)

PathLike = Union[str, Path]


def minmax_normalize(volume: np.ndarray) -> np.ndarray:
    """Scale a volume to [0, 1] with its own min and max.

    A constant volume maps to all zeros.

    Raises:
        DatasetError: If the volume holds NaN or infinite values
    """
    values = np.asarray(volume, dtype=np.float64)
    if not np.isfinite(values).all():
        raise DatasetError("cannot normalize a volume with non-finite values")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        logger.warning("volume has zero intensity range, normalizing to zeros")
        return np.zeros(values.shape, dtype=np.float32)
    return ((values - lo) / (hi - lo)).astype(np.float32)


def nonzero_bbox(dwi: np.ndarray) -> BoundingBox3D:
    """Tightest box around every voxel with ``|v| > 0``.

    Raises:
        DatasetError: If the volume is all zeros
    """
    nonzero = np.abs(dwi) > 0
    if not nonzero.any():
        raise DatasetError("empty DWI signal")
    lo = []
    hi = []
    for axis in range(3):
        others = tuple(a for a in range(3) if a != axis)
        hits = np.flatnonzero(nonzero.any(axis=others))
        lo.append(int(hits[0]))
        hi.append(int(hits[-1]) + 1)
    return BoundingBox3D((lo[0], lo[1], lo[2]), (hi[0], hi[1], hi[2]))


def crop_case(case: CaseVolume, box: BoundingBox3D) -> CaseVolume:
    """Crop DWI, ADC and mask with the same box.

    Raises:
        DatasetError: If the box does not fit inside the case
    """
    if not box.fits(case.shape):
        raise DatasetError(f"case {case.case_id}: box lo={box.lo} hi={box.hi} out of range for shape {case.shape}")
    index = box.slices()
    affine = None
    if case.affine is not None:
        affine = np.array(case.affine, dtype=np.float64, copy=True)
        affine[:3, 3] = case.affine[:3, :3] @ np.asarray(box.lo, dtype=np.float64) + case.affine[:3, 3]
    return CaseVolume(
        case_id=case.case_id,
        dwi=np.ascontiguousarray(case.dwi[index]),
        adc=np.ascontiguousarray(case.adc[index]),
        mask=np.ascontiguousarray(case.mask[index]),
        affine=affine,
        spacing=case.spacing,
    )


def resize_stack(stack: np.ndarray, out_hw: int = INPUT_HW) -> np.ndarray:
    """Bilinearly resize an (H, W, S) stack to (out_hw, out_hw, S), clipped to [0, 1]."""
    if stack.shape[:2] == (out_hw, out_hw):
        return np.ascontiguousarray(stack, dtype=np.float32)
    tensor = torch.from_numpy(np.ascontiguousarray(stack, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)
    resized = F.interpolate(tensor, size=(out_hw, out_hw), mode="bilinear", align_corners=False)
    return np.ascontiguousarray(resized[0].permute(1, 2, 0).clamp_(0.0, 1.0).numpy())


def resize_mask(mask: np.ndarray, out_hw: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resize of a 2D binary mask, returned as float32 0/1."""
    if mask.shape == tuple(out_hw):
        return np.ascontiguousarray(mask, dtype=np.float32)
    tensor = torch.from_numpy(np.ascontiguousarray(mask, dtype=np.float32))[None, None]
    resized = F.interpolate(tensor, size=tuple(out_hw), mode="nearest-exact")
    return np.ascontiguousarray(resized[0, 0].numpy())


def candidate_centers(depth: int, slices_per_modality: int) -> range:
    """Center slices eligible for stacking; S=3 skips the first and last slice."""
    if slices_per_modality == 3:
        return range(1, depth - 1)
    return range(depth)


def extract_samples(
    case: CaseVolume,
    slices_per_modality: int,
    signal_threshold: float,
    out_hw: int = INPUT_HW,
    apply_filter: bool = True,
    origin_k: int = 0,
) -> List[SampleRecord]:
    """Cut a normalized, cropped case into slice-stack samples.

    Args:
        case: Case with intensities already in [0, 1]
        slices_per_modality: S, 1 or 3
        signal_threshold: A center is kept iff its mean DWI intensity exceeds this
        out_hw: Output plane size
        apply_filter: Set False to keep every candidate center (used for prediction)
        origin_k: Slice offset of the crop in the original volume, added to
            each record's ``center_slice``

    Returns:
        Samples in increasing center-slice order

    Raises:
        DatasetError: If the case has fewer slices than S
    """
    if slices_per_modality not in (1, 3):
        raise DatasetError(f"slices_per_modality must be 1 or 3, got {slices_per_modality}")
    depth = case.depth
    if depth < slices_per_modality:
        raise DatasetError(f"case {case.case_id}: depth {depth} is smaller than S={slices_per_modality}")

    half = slices_per_modality // 2
    samples = []
    for center in candidate_centers(depth, slices_per_modality):
        if apply_filter:
            mean_signal = float(case.dwi[:, :, center].mean())
            if not mean_signal > signal_threshold:
                logger.debug("case %s: skipping slice %d (mean DWI %.4f)", case.case_id, center + origin_k, mean_signal)
                continue
        window = slice(center - half, center + half + 1)
        samples.append(
            SampleRecord(
                case_id=case.case_id,
                center_slice=center + origin_k,
                dwi_stack=resize_stack(case.dwi[:, :, window], out_hw),
                adc_stack=resize_stack(case.adc[:, :, window], out_hw),
                target=resize_mask(case.mask[:, :, center], (out_hw, out_hw)),
            )
        )
    return samples


def prepare_case(case: CaseVolume) -> Tuple[CaseVolume, BoundingBox3D]:
    """Normalize both modalities per volume, then crop to the DWI bounding box."""
    normalized = CaseVolume(
        case_id=case.case_id,
        dwi=minmax_normalize(case.dwi),
        adc=minmax_normalize(case.adc),
        mask=case.mask,
        affine=case.affine,
        spacing=case.spacing,
    )
    box = nonzero_bbox(normalized.dwi)
    return crop_case(normalized, box), box


def preprocess_case(case: CaseVolume, config: Optional[PreprocessConfig] = None) -> List[SampleRecord]:
    """Full preprocessing of one case into filtered training samples."""
    config = config or PreprocessConfig()
    cropped, box = prepare_case(case)
    samples = extract_samples(cropped, config.slices_per_modality, config.signal_threshold, config.out_hw, origin_k=box.lo[2])
    if not samples:
        logger.warning("case %s produced no samples", case.case_id)
    return samples


def _preprocess_and_write(dataset_root: PathLike, case_id: str, split_dir: Path, config: PreprocessConfig) -> List[str]:
    samples = preprocess_case(load_case(dataset_root, case_id), config)
    names = []
    for record in samples:
        write_sample(record, split_dir / sample_filename(record))
        names.append(sample_filename(record))
    logger.info("case %s: %d samples", case_id, len(names))
    return names


def preprocess_split(
    dataset_root: PathLike,
    case_ids: Sequence[str],
    out_dir: PathLike,
    split: str,
    config: Optional[PreprocessConfig] = None,
    workers: int = 0,
) -> List[Path]:
    """Preprocess the cases of one split into ``out_dir/<split>/``.

    Cases run in a thread pool when ``workers > 1``; the index lists samples in
    case order then slice order regardless of completion order.

    Returns:
        Paths of the written sample files in index order
    """
    config = config or PreprocessConfig()
    split_dir = Path(out_dir) / split
    split_dir.mkdir(parents=True, exist_ok=True)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_case = list(pool.map(lambda cid: _preprocess_and_write(dataset_root, cid, split_dir, config), case_ids))
    else:
        per_case = [_preprocess_and_write(dataset_root, cid, split_dir, config) for cid in case_ids]

    names = [name for case_names in per_case for name in case_names]
    write_index(split_dir, split, names)
    return [split_dir / name for name in names]


def preprocess_manifest(
    dataset_root: PathLike,
    manifest: SplitManifest,
    out_dir: PathLike,
    config: Optional[PreprocessConfig] = None,
    workers: int = 0,
    splits: Sequence[str] = SPLIT_NAMES,
) -> Dict[str, List[Path]]:
    """Preprocess every requested split of a manifest."""
    return {split: preprocess_split(dataset_root, manifest.ids(split), out_dir, split, config, workers) for split in splits}


__all__ = [
    "minmax_normalize",
    "nonzero_bbox",
    "crop_case",
    "resize_stack",
    "resize_mask",
    "candidate_centers",
    "extract_samples",
    "prepare_case",
    "preprocess_case",
    "preprocess_split",
    "preprocess_manifest",
]
