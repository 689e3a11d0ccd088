#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created tests for case discovery, NIfTI loading and split manifests
# - Added truncated-file and CaseVolume invariant tests
#

"""Tests for strokeseg.volume_io."""

import json
import math
import zlib
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pytest

from strokeseg.errors import DatasetError, SplitError
from strokeseg.records import CaseVolume
from strokeseg.volume_io import (
    SplitManifest,
    dataset_fingerprint,
    discover_cases,
    load_case,
    make_split,
    read_manifest,
    save_nifti,
    write_manifest,
)


def write_case(root: Path, case_id: str, shape: Tuple[int, int, int] = (8, 8, 5), adc_shape: Optional[Tuple[int, int, int]] = None, mask_scale: float = 1.0, skip: str = "") -> None:
    """Write a case directory with random volumes."""
    rng = np.random.default_rng(zlib.crc32(case_id.encode("utf-8")))
    case_dir = root / case_id
    if skip != "dwi":
        save_nifti(rng.random(shape).astype(np.float32), case_dir / f"{case_id}_dwi.nii.gz")
    if skip != "adc":
        save_nifti(rng.random(adc_shape or shape).astype(np.float32), case_dir / f"{case_id}_adc.nii.gz")
    if skip != "msk":
        mask = (rng.random(shape) > 0.7).astype(np.float32) * mask_scale
        save_nifti(mask, case_dir / f"{case_id}_msk.nii.gz")


class TestDiscoverCases:
    """Test discovery of case directories."""

    def test_sorted(self, tmp_path: Path) -> None:
        """Test that case IDs are returned sorted whatever the creation order."""
        for case_id in ("c3", "c1", "c2"):
            write_case(tmp_path, case_id)
        assert discover_cases(tmp_path) == ["c1", "c2", "c3"]

    def test_missing_adc(self, tmp_path: Path) -> None:
        """Test that a missing modality names the case and the file."""
        write_case(tmp_path, "c1", skip="adc")
        with pytest.raises(DatasetError, match="case c1: ADC file not found"):
            discover_cases(tmp_path)

    def test_empty_root(self, tmp_path: Path) -> None:
        """Test that an empty root is an error."""
        with pytest.raises(DatasetError, match="no cases discovered"):
            discover_cases(tmp_path)

    def test_missing_root(self, tmp_path: Path) -> None:
        """Test that a missing root raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            discover_cases(tmp_path / "nope")

    def test_hidden_directories_ignored(self, tmp_path: Path) -> None:
        """Test that dot-directories are not cases."""
        write_case(tmp_path, "c1")
        (tmp_path / ".cache").mkdir()
        assert discover_cases(tmp_path) == ["c1"]


class TestLoadCase:
    """Test NIfTI case loading."""

    def test_shapes_passthrough(self, tmp_path: Path) -> None:
        """Test that a valid case keeps its shape."""
        write_case(tmp_path, "c1", shape=(64, 64, 20))
        case = load_case(tmp_path, "c1")
        assert case.shape == (64, 64, 20)
        assert case.dwi.shape == case.adc.shape == case.mask.shape == (64, 64, 20)
        assert case.dwi.dtype == np.float32

    def test_shape_mismatch(self, tmp_path: Path) -> None:
        """Test that mismatched modality shapes are listed in the error."""
        write_case(tmp_path, "c1", shape=(64, 64, 20), adc_shape=(64, 64, 19))
        with pytest.raises(DatasetError, match="shape mismatch") as info:
            load_case(tmp_path, "c1")
        assert "(64, 64, 19)" in str(info.value)
        assert "(64, 64, 20)" in str(info.value)

    def test_mask_binarized(self, tmp_path: Path) -> None:
        """Test that a {0, 255} mask loads as {0, 1}."""
        write_case(tmp_path, "c1", mask_scale=255.0)
        case = load_case(tmp_path, "c1")
        assert set(np.unique(case.mask).tolist()) <= {0, 1}
        assert case.mask.dtype == np.uint8
        assert case.mask.sum() > 0

    def test_non_finite(self, tmp_path: Path) -> None:
        """Test that NaN voxels are rejected."""
        write_case(tmp_path, "c1")
        dwi = np.ones((8, 8, 5), dtype=np.float32)
        dwi[1, 1, 1] = np.nan
        save_nifti(dwi, tmp_path / "c1" / "c1_dwi.nii.gz")
        with pytest.raises(DatasetError, match="non-finite"):
            load_case(tmp_path, "c1")

    def test_pure(self, tmp_path: Path) -> None:
        """Test that loading twice gives identical arrays."""
        write_case(tmp_path, "c1")
        a = load_case(tmp_path, "c1")
        b = load_case(tmp_path, "c1")
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_spacing_and_affine(self, tmp_path: Path) -> None:
        """Test that affine and voxel spacing are carried along."""
        write_case(tmp_path, "c1")
        case = load_case(tmp_path, "c1")
        assert case.affine is not None and case.affine.shape == (4, 4)
        assert case.spacing == (1.0, 1.0, 1.0)

    def test_truncated_file(self, tmp_path: Path) -> None:
        """Test that a cut-off compressed volume is a DatasetError naming the file."""
        write_case(tmp_path, "c1", shape=(32, 32, 12))
        path = tmp_path / "c1" / "c1_adc.nii.gz"
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(DatasetError, match="c1_adc.nii.gz"):
            load_case(tmp_path, "c1")


class TestCaseVolume:
    """Test the invariants checked when a CaseVolume is built."""

    def test_non_binary_mask(self) -> None:
        """Test that mask values other than 0 and 1 are rejected."""
        mask = np.zeros((4, 4, 4), dtype=np.uint8)
        mask[1, 1, 1] = 255
        with pytest.raises(DatasetError, match="mask"):
            CaseVolume("c1", np.ones((4, 4, 4)), np.ones((4, 4, 4)), mask)

    def test_bool_mask_accepted(self) -> None:
        """Test that a boolean mask is binary by construction."""
        case = CaseVolume("c1", np.ones((4, 4, 4)), np.ones((4, 4, 4)), np.ones((4, 4, 4), dtype=bool))
        assert case.shape == (4, 4, 4)

    @pytest.mark.parametrize("shape", [(2, 8, 8), (8, 2, 8), (8, 8, 2)])
    def test_thin_axis(self, shape: Tuple[int, int, int]) -> None:
        """Test that every axis needs at least three voxels."""
        with pytest.raises(DatasetError, match="at least 3"):
            CaseVolume("c1", np.ones(shape), np.ones(shape), np.zeros(shape, dtype=np.uint8))


class TestMakeSplit:
    """Test deterministic split manifests."""

    def test_sizes_for_250_cases(self) -> None:
        """Test the half-up rounding rule on 250 cases."""
        ids = [f"case{i:03d}" for i in range(250)]
        manifest = make_split(ids, seed=11)
        n_train = math.floor(250 * 0.64 + 0.5)
        n_val = math.floor(250 * 0.16 + 0.5)
        assert manifest.sizes == (n_train, n_val, 250 - n_train - n_val) == (160, 40, 50)

    def test_invariants(self) -> None:
        """Test disjointness and coverage of the discovered set."""
        ids = [f"c{i}" for i in range(37)]
        manifest = make_split(ids, seed=5)
        train, val, test = set(manifest.train_ids), set(manifest.val_ids), set(manifest.test_ids)
        assert not (train & val) and not (train & test) and not (val & test)
        assert train | val | test == set(ids)

    def test_byte_identical(self) -> None:
        """Test that the same inputs give byte-identical manifests."""
        ids = [f"c{i}" for i in range(20)]
        assert make_split(ids, 7).to_json() == make_split(list(reversed(ids)), 7).to_json()

    def test_seed_changes_split(self) -> None:
        """Test that a different seed gives a different partition."""
        ids = [f"c{i}" for i in range(50)]
        assert make_split(ids, 1).test_ids != make_split(ids, 2).test_ids

    @pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (0.7, 0.3), (1.2, -0.1, -0.1)])
    def test_invalid_ratios(self, ratios: Tuple[float, ...]) -> None:
        """Test that invalid ratios are rejected."""
        with pytest.raises(SplitError):
            make_split(["a", "b", "c", "d"], 0, ratios)

    def test_too_few_cases(self) -> None:
        """Test that fewer than three cases cannot be split."""
        with pytest.raises(SplitError):
            make_split(["a", "b"], 0)

    def test_duplicates(self) -> None:
        """Test that duplicate IDs are rejected."""
        with pytest.raises(SplitError):
            make_split(["a", "a", "b", "c"], 0)

    def test_overlapping_manifest_rejected(self) -> None:
        """Test that a manifest listing one case twice cannot be built."""
        with pytest.raises(SplitError):
            SplitManifest(train_ids=["a"], val_ids=["a"], test_ids=["b"], seed=0)


class TestManifestFiles:
    """Test manifest JSON layout and round-trip."""

    def test_key_order_and_newline(self, tmp_path: Path) -> None:
        """Test the fixed key order and trailing newline."""
        path = write_manifest(make_split([f"c{i}" for i in range(10)], 3, created_from="sha256:abc"), tmp_path / "split.json")
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n")
        assert list(json.loads(text)) == ["seed", "created_from", "train_ids", "val_ids", "test_ids"]

    @pytest.mark.parametrize("seed", [0, 1, 17, 2**31 - 1])
    def test_round_trip(self, tmp_path: Path, seed: int) -> None:
        """Test write_manifest then read_manifest for several seeds."""
        manifest = make_split([f"c{i}" for i in range(12)], seed)
        assert read_manifest(write_manifest(manifest, tmp_path / "m.json")) == manifest

    def test_read_missing(self, tmp_path: Path) -> None:
        """Test that reading a missing manifest raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            read_manifest(tmp_path / "missing.json")

    def test_fingerprint_stable(self, tmp_path: Path) -> None:
        """Test that the dataset fingerprint is stable and prefixed."""
        write_case(tmp_path, "c1")
        write_case(tmp_path, "c2")
        first = dataset_fingerprint(tmp_path, ["c2", "c1"])
        assert first == dataset_fingerprint(tmp_path, ["c1", "c2"])
        assert first.startswith("sha256:") and len(first) == len("sha256:") + 16
