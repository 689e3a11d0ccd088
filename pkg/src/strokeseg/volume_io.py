#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created case discovery over <case_id>/<case_id>_{dwi,adc,msk}.nii[.gz] directories
# - Case discovery uses os.scandir on an absolute root and sorts the result
# - Added load_case with shape/finiteness checks and mask binarization at 0.5
# - Added save_case writing the same on-disk layout
# - Added SplitManifest, make_split and JSON manifest read/write with fixed key order
# - Added dataset fingerprint used as the manifest's created_from field
# - Manifest writes are atomic (temp file + rename)
# - Unreadable or truncated NIfTI payloads are reported as DatasetError
#

"""NIfTI case loading, case discovery and split manifests."""

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import nibabel as nib
import numpy as np

from .errors import DatasetError, SplitError
from .logs import get_logger
from .records import MIN_CASE_EXTENT, CaseVolume

logger = get_logger(__name__)

PathLike = Union[str, Path]

MODALITY_SUFFIXES: Dict[str, str] = {"dwi": "DWI", "adc": "ADC", "msk": "mask"}
NIFTI_EXTENSIONS = (".nii.gz", ".nii")
SPLIT_NAMES = ("train", "val", "test")


def _find_modality_file(case_dir: Path, case_id: str, suffix: str) -> Path:
    candidates = [case_dir / f"{case_id}_{suffix}{ext}" for ext in NIFTI_EXTENSIONS]
    found = [c for c in candidates if c.is_file()]
    label = MODALITY_SUFFIXES[suffix]
    if not found:
        raise DatasetError(f"case {case_id}: {label} file not found")
    if len(found) > 1:
        raise DatasetError(f"case {case_id}: more than one {label} file ({', '.join(p.name for p in found)})")
    return found[0]


def case_files(dataset_root: PathLike, case_id: str) -> Dict[str, Path]:
    """Return the DWI, ADC and mask paths of a case, keyed by file suffix.

    Raises:
        DatasetError: If the case directory or one of its files is missing
    """
    case_dir = Path(dataset_root) / case_id
    if not case_dir.is_dir():
        raise DatasetError(f"case {case_id}: directory not found under {dataset_root}")
    return {suffix: _find_modality_file(case_dir, case_id, suffix) for suffix in MODALITY_SUFFIXES}


def discover_cases(dataset_root: PathLike) -> List[str]:
    """List the case IDs under a dataset root.

    Every non-hidden subdirectory is a case and must hold exactly one DWI,
    ADC and mask file.

    Args:
        dataset_root: Directory holding one subdirectory per case

    Returns:
        Case IDs sorted lexicographically

    Raises:
        FileNotFoundError: If the root does not exist
        DatasetError: If no cases are found or a case is incomplete
    """
    root = os.path.abspath(dataset_root)
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset root not found: {dataset_root}")

    case_ids = []
    with os.scandir(root) as entries:
        for entry in entries:
            if entry.is_dir() and not entry.name.startswith("."):
                case_ids.append(entry.name)

    if not case_ids:
        raise DatasetError("no cases discovered")

    case_ids.sort()
    for case_id in case_ids:
        case_files(root, case_id)
    logger.debug("discovered %d cases under %s", len(case_ids), root)
    return case_ids


def load_case(dataset_root: PathLike, case_id: str) -> CaseVolume:
    """Load one case into a CaseVolume.

    Args:
        dataset_root: Dataset root directory
        case_id: Case directory name

    Returns:
        CaseVolume with float32 DWI/ADC and a uint8 mask binarized by ``mask > 0.5``

    Raises:
        DatasetError: On missing files, shape mismatch, non-finite voxels or too small volumes
    """
    paths = case_files(dataset_root, case_id)
    images = {}
    arrays = {}
    for suffix, path in paths.items():
        try:
            images[suffix] = nib.load(str(path))
            arrays[suffix] = np.asarray(images[suffix].get_fdata(dtype=np.float32))
        except Exception as e:
            raise DatasetError(f"case {case_id}: cannot read {path.name}: {e}") from e

    shapes = {suffix: arr.shape for suffix, arr in arrays.items()}
    if not (shapes["dwi"] == shapes["adc"] == shapes["msk"]):
        raise DatasetError(f"case {case_id}: shape mismatch dwi={shapes['dwi']} adc={shapes['adc']} mask={shapes['msk']}")
    if len(shapes["dwi"]) != 3:
        raise DatasetError(f"case {case_id}: volumes must be 3D, got {shapes['dwi']}")
    if min(shapes["dwi"]) < MIN_CASE_EXTENT:
        raise DatasetError(f"case {case_id}: every axis needs at least {MIN_CASE_EXTENT} voxels, got {shapes['dwi']}")
    for suffix, arr in arrays.items():
        if not np.isfinite(arr).all():
            raise DatasetError(f"case {case_id}: {MODALITY_SUFFIXES[suffix]} contains non-finite voxels")

    dwi_img = images["dwi"]
    spacing = tuple(float(z) for z in dwi_img.header.get_zooms()[:3])
    return CaseVolume(
        case_id=case_id,
        dwi=arrays["dwi"],
        adc=arrays["adc"],
        mask=(arrays["msk"] > 0.5).astype(np.uint8),
        affine=np.asarray(dwi_img.affine, dtype=np.float64),
        spacing=(spacing[0], spacing[1], spacing[2]),
    )


def save_nifti(data: np.ndarray, path: PathLike, affine: Optional[np.ndarray] = None) -> Path:
    """Write an array as a NIfTI file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = nib.Nifti1Image(data, affine=np.eye(4) if affine is None else np.asarray(affine, dtype=np.float64))
    nib.save(img, str(path))
    return path


def save_case(case: CaseVolume, dataset_root: PathLike) -> Path:
    """Write a CaseVolume in the on-disk layout read by load_case.

    Returns:
        The case directory
    """
    case_dir = Path(dataset_root) / case.case_id
    save_nifti(case.dwi.astype(np.float32), case_dir / f"{case.case_id}_dwi.nii.gz", case.affine)
    save_nifti(case.adc.astype(np.float32), case_dir / f"{case.case_id}_adc.nii.gz", case.affine)
    save_nifti(case.mask.astype(np.uint8), case_dir / f"{case.case_id}_msk.nii.gz", case.affine)
    return case_dir


def dataset_fingerprint(dataset_root: PathLike, case_ids: Iterable[str]) -> str:
    """Hash of case IDs and file sizes, used to tie a manifest to its dataset."""
    digest = hashlib.sha256()
    for case_id in sorted(case_ids):
        for suffix, path in sorted(case_files(dataset_root, case_id).items()):
            digest.update(f"{case_id}:{path.name}:{path.stat().st_size}\n".encode("utf-8"))
    return "sha256:" + digest.hexdigest()[:16]


@dataclass
class SplitManifest:
    """Deterministic train/val/test partition of case IDs."""

    train_ids: List[str]
    val_ids: List[str]
    test_ids: List[str]
    seed: int
    created_from: str = ""

    def __post_init__(self) -> None:
        seen: Dict[str, str] = {}
        for name in SPLIT_NAMES:
            for case_id in self.ids(name):
                if case_id in seen:
                    raise SplitError(f"case {case_id} appears in both {seen[case_id]} and {name}")
                seen[case_id] = name

    def ids(self, split: str) -> List[str]:
        """Case IDs of one split (``train``, ``val`` or ``test``)."""
        if split not in SPLIT_NAMES:
            raise SplitError(f"unknown split {split!r}, expected one of {SPLIT_NAMES}")
        ids: List[str] = getattr(self, f"{split}_ids")
        return ids

    @property
    def all_ids(self) -> List[str]:
        return sorted(self.train_ids + self.val_ids + self.test_ids)

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.train_ids), len(self.val_ids), len(self.test_ids))

    def to_json(self) -> str:
        """Serialize with keys in the fixed manifest order, newline-terminated."""
        data = {
            "seed": self.seed,
            "created_from": self.created_from,
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
        }
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SplitError(f"manifest is not valid JSON: {e}") from e
        expected = ["seed", "created_from", "train_ids", "val_ids", "test_ids"]
        if not isinstance(data, dict) or sorted(data) != sorted(expected):
            raise SplitError(f"manifest must hold exactly the keys {expected}")
        return cls(
            train_ids=[str(c) for c in data["train_ids"]],
            val_ids=[str(c) for c in data["val_ids"]],
            test_ids=[str(c) for c in data["test_ids"]],
            seed=int(data["seed"]),
            created_from=str(data["created_from"]),
        )


def _split_sizes(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    # Round half up for train and val; test takes the remainder.
    n_train = int(math.floor(n * ratios[0] + 0.5))
    n_val = int(math.floor(n * ratios[1] + 0.5))
    return n_train, n_val, n - n_train - n_val


def make_split(case_ids: Sequence[str], seed: int, ratios: Sequence[float] = (0.64, 0.16, 0.20), created_from: str = "") -> SplitManifest:
    """Shuffle case IDs with a seeded generator and partition them by ratio.

    Args:
        case_ids: All case IDs (input order does not matter)
        seed: Seed of the shuffling generator
        ratios: (train, val, test) fractions summing to 1
        created_from: Dataset fingerprint recorded in the manifest

    Returns:
        SplitManifest whose lists are sorted within each split

    Raises:
        SplitError: On invalid ratios, duplicate IDs or fewer than one case per split
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be three non-negative fractions summing to 1, got {list(ratios)}")
    ids = sorted(case_ids)
    if len(set(ids)) != len(ids):
        raise SplitError("case IDs must be unique")
    if len(ids) < 3:
        raise SplitError(f"need at least 3 cases to split, got {len(ids)}")

    sizes = _split_sizes(len(ids), ratios)
    if min(sizes) < 1:
        raise SplitError(f"ratios {list(ratios)} leave a split empty for {len(ids)} cases (sizes {sizes})")

    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    n_train, n_val, _ = sizes
    return SplitManifest(
        train_ids=sorted(shuffled[:n_train]),
        val_ids=sorted(shuffled[n_train : n_train + n_val]),
        test_ids=sorted(shuffled[n_train + n_val :]),
        seed=int(seed),
        created_from=created_from,
    )


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write bytes to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_manifest(manifest: SplitManifest, path: PathLike) -> Path:
    """Write a manifest as UTF-8 JSON."""
    return atomic_write_bytes(path, manifest.to_json().encode("utf-8"))


def read_manifest(path: PathLike) -> SplitManifest:
    """Read a manifest written by write_manifest."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    return SplitManifest.from_json(path.read_text(encoding="utf-8"))


__all__ = [
    "discover_cases",
    "load_case",
    "save_case",
    "save_nifti",
    "case_files",
    "dataset_fingerprint",
    "SplitManifest",
    "make_split",
    "write_manifest",
    "read_manifest",
    "atomic_write_bytes",
    "SPLIT_NAMES",
]
