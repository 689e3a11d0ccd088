#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created tests for CLI dispatch and exit codes
# - Added exit-code tests for wrongly typed config, truncated volumes and malformed indexes
# - Added phantom-from-config and default report location tests
#

"""Tests for strokeseg.cli."""

import json
from pathlib import Path
from typing import Callable, List

import pytest

from strokeseg.cli import RUN_DIR_ENV, build_parser, main, parse_ratios, parse_shape, resolve_run_dir
from strokeseg.checkpoint import save_checkpoint
from strokeseg.config import ModelConfig
from strokeseg.evaluate import CaseResult, EvalReport
from strokeseg.nets import build_model
from strokeseg.volume_io import load_case, read_manifest


class TestExitCodes:
    """Test the 0/1/2 exit code contract."""

    def test_split(self, phantom_root: Path, phantom_case_ids: List[str]) -> None:
        """Test that a split writes a manifest and exits 0."""
        code = main(["split", "--root", str(phantom_root), "--seed", "7", "--ratios", "0.64,0.16,0.20"])
        assert code == 0
        manifest = read_manifest(phantom_root / "split.json")
        assert manifest.seed == 7
        assert manifest.all_ids == phantom_case_ids
        assert manifest.created_from.startswith("sha256:")

    def test_split_out(self, phantom_root: Path, tmp_path: Path) -> None:
        """Test that --out chooses the manifest path and equal seeds give equal manifests."""
        for name in ("a.json", "b.json"):
            assert main(["split", "--root", str(phantom_root), "--seed", "3", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_train_without_root(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that train without --root is a usage error."""
        code = main(["train", "--run-dir", str(tmp_path / "run")])
        assert code == 1
        err = capsys.readouterr().err
        assert "usage:" in err
        assert "requires --root" in err

    def test_missing_checkpoint(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a missing checkpoint exits 2 with one diagnostic line."""
        code = main(["evaluate", "--checkpoint", "missing.ckpt"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert "checkpoint not found" in err[0]
        assert "missing.ckpt" in err[0]

    def test_unknown_subcommand(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that an unknown subcommand prints usage and exits 1."""
        assert main(["segment"]) == 1
        assert "usage:" in capsys.readouterr().err

    def test_unknown_flag(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that an unknown flag is a usage error."""
        assert main(["split", "--frobnicate"]) == 1
        assert "usage:" in capsys.readouterr().err

    def test_bad_ratios(self, phantom_root: Path) -> None:
        """Test that malformed ratios are a usage error and impossible ratios a runtime error."""
        assert main(["split", "--root", str(phantom_root), "--ratios", "0.5,0.5"]) == 1
        assert main(["split", "--root", str(phantom_root), "--ratios", "0.6,0.6,-0.2"]) == 2

    def test_missing_root_directory(self, tmp_path: Path) -> None:
        """Test that a nonexistent dataset root is a runtime error."""
        assert main(["split", "--root", str(tmp_path / "nowhere")]) == 2


    def test_wrongly_typed_config(self, phantom_root: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a wrongly typed config value exits 2 with one line naming the key."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"train": {"epochs": "x"}}))
        assert main(["split", "--root", str(phantom_root), "--config", str(config)]) == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert "train.epochs" in err[0]

    def test_truncated_volume(self, phantom_root: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a truncated NIfTI file exits 2 with one line."""
        manifest = tmp_path / "split.json"
        assert main(["split", "--root", str(phantom_root), "--seed", "1", "--out", str(manifest)]) == 0
        for path in phantom_root.glob("*/*_dwi.nii.gz"):
            path.write_bytes(path.read_bytes()[:100])
        capsys.readouterr()
        code = main(["preprocess", "--root", str(phantom_root), "--manifest", str(manifest), "--out", str(tmp_path / "samples"), "--splits", "val", "--log-level", "ERROR"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert "cannot read" in err[0]

    def test_malformed_sample_index(self, phantom_root: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a sample index without a samples list exits 2."""
        samples = tmp_path / "samples"
        for split in ("train", "val"):
            (samples / split).mkdir(parents=True)
            (samples / split / "index.json").write_text(json.dumps({"split": split}))
        code = main(["train", "--root", str(phantom_root), "--samples", str(samples), "--run-dir", str(tmp_path / "run"), "--log-level", "ERROR"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert "index.json" in err[0]


class TestSubcommands:
    """Test individual subcommands end to end on tiny inputs."""

    def test_phantom(self, tmp_path: Path) -> None:
        """Test that phantom writes the requested number of cases."""
        root = tmp_path / "phantom"
        assert main(["phantom", "--root", str(root), "--cases", "3", "--shape", "16,16,8", "--seed", "1"]) == 0
        assert sorted(p.name for p in root.iterdir()) == ["case000", "case001", "case002"]

    def test_phantom_from_config(self, tmp_path: Path) -> None:
        """Test that the phantom section of --config reaches the generator and flags override it."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"phantom": {"n_cases": 2, "shape": [16, 16, 8], "lesion_count_range": [0, 0]}}))
        root = tmp_path / "from-file"
        assert main(["phantom", "--root", str(root), "--config", str(config)]) == 0
        assert sorted(p.name for p in root.iterdir()) == ["case000", "case001"]
        case = load_case(root, "case001")
        assert case.shape == (16, 16, 8)
        assert not case.mask.any()

        root = tmp_path / "with-flags"
        assert main(["phantom", "--root", str(root), "--config", str(config), "--cases", "3", "--lesion-count", "1,1"]) == 0
        assert len(list(root.iterdir())) == 3
        assert load_case(root, "case000").mask.any()

    def test_evaluate_writes_report_next_to_checkpoint(self, phantom_root: Path, tmp_path: Path, tiny_config: Callable[..., ModelConfig]) -> None:
        """Test that evaluate without --run-dir or --report still writes the report."""
        checkpoint = save_checkpoint(build_model(tiny_config()), tmp_path / "models" / "model.ckpt")
        code = main(["evaluate", "--checkpoint", str(checkpoint), "--root", str(phantom_root), "--cases", "case000", "case001", "--log-level", "ERROR"])
        assert code == 0
        report = EvalReport.read(tmp_path / "models" / "eval_test.json")
        assert [r.case_id for r in report.per_case] == ["case000", "case001"]

    def test_preprocess(self, phantom_root: Path, tmp_path: Path) -> None:
        """Test that preprocess writes per-split sample folders and its configuration."""
        manifest = tmp_path / "split.json"
        assert main(["split", "--root", str(phantom_root), "--seed", "1", "--out", str(manifest)]) == 0
        out = tmp_path / "samples"
        assert main(["preprocess", "--root", str(phantom_root), "--manifest", str(manifest), "--out", str(out), "--slices", "1", "--splits", "val"]) == 0
        assert (out / "val").is_dir()
        assert not (out / "train").exists()
        assert json.loads((out / "preprocess_config.json").read_text())["slices_per_modality"] == 1

    def test_compare(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that compare prints one row per report."""
        paths = []
        for label, value in (("Dual Encoder, Three Slice", 0.726), ("Single Encoder, Single Slice", 0.6805)):
            report = EvalReport.from_results([CaseResult("case000", value, 10, 10)], "f", 0.5, label)
            paths.append(str(report.write(tmp_path / f"{len(paths)}.json")))
        assert main(["compare", *paths, "--title", "Test split"]) == 0
        out = capsys.readouterr().out
        assert "72.6" in out
        assert "68.0" in out or "68.1" in out
        assert "Single Encoder, Single Slice" in out

    def test_inspect_requires_run_dir(self) -> None:
        """Test that inspect without --run-dir is a usage error."""
        assert main(["inspect"]) == 1


class TestHelpers:
    """Test parsing helpers and run directory resolution."""

    def test_parse_ratios(self) -> None:
        """Test ratio parsing."""
        assert parse_ratios("0.64,0.16,0.20") == (0.64, 0.16, 0.20)

    def test_parse_shape(self) -> None:
        """Test shape parsing."""
        assert parse_shape("48,48,16") == (48, 48, 16)

    def test_run_dir_precedence(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test configured value, then environment, then a timestamped default."""
        monkeypatch.setenv(RUN_DIR_ENV, "from-env")
        assert resolve_run_dir("explicit") == Path("explicit")
        assert resolve_run_dir(None) == Path("from-env")
        monkeypatch.delenv(RUN_DIR_ENV)
        default = resolve_run_dir(None)
        assert default.parent == Path("runs")
        assert len(default.name) == len("20250101-120000")

    def test_every_subcommand_registered(self) -> None:
        """Test that the parser knows every subcommand."""
        parser = build_parser()
        for command in ("phantom", "split", "preprocess", "train", "evaluate", "predict", "inspect", "compare"):
            args = parser.parse_args([command] + (["x.json"] if command == "compare" else []))
            assert args.command == command
