#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created tests for layered run configuration
# - Added type-checking and phantom section tests
#

"""Tests for strokeseg.config."""

import json
import re
from pathlib import Path

import pytest

from strokeseg.config import ModelConfig, PreprocessConfig, RunConfig, TrainConfig, Variant, config_fingerprint, resolve_run_config
from strokeseg.errors import ConfigError, ModelConfigError
from strokeseg.phantom import PhantomSpec


class TestResolveRunConfig:
    """Test defaults, config files and overrides."""

    def test_defaults(self) -> None:
        """Test the default configuration."""
        config = resolve_run_config()
        assert config.dataset_root is None
        assert config.model.variant is Variant.DUAL_ENCODER
        assert config.model.slices_per_modality == 3
        assert config.train.epochs == 100
        assert config.train.freeze_epochs == 5
        assert config.train.learning_rate == 1e-4
        assert config.split_ratios == (0.64, 0.16, 0.20)

    def test_layering(self, tmp_path: Path) -> None:
        """Test that flags override the file and the file overrides defaults."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"train": {"epochs": 20, "batch_size": 4}, "workers": 2}))
        config = resolve_run_config(path, {"train.epochs": 7, "train.learning_rate": None})
        assert config.train.epochs == 7
        assert config.train.batch_size == 4
        assert config.train.learning_rate == 1e-4
        assert config.workers == 2

    def test_unknown_override(self) -> None:
        """Test that an unknown dotted key is rejected."""
        with pytest.raises(ConfigError, match="unknown configuration key"):
            resolve_run_config(None, {"train.epoch": 3})

    def test_unknown_file_key(self, tmp_path: Path) -> None:
        """Test that an unknown key inside a config file is rejected."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"model": {"layers": 3}}))
        with pytest.raises(ConfigError, match="layers"):
            resolve_run_config(path)

    def test_invalid_json(self, tmp_path: Path) -> None:
        """Test that a malformed config file is a ConfigError."""
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            resolve_run_config(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that a missing config file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            resolve_run_config(tmp_path / "missing.json")

    def test_slice_counts_must_agree(self) -> None:
        """Test that model and preprocessing S must match."""
        with pytest.raises(ConfigError, match="slices_per_modality"):
            resolve_run_config(None, {"model.slices_per_modality": 1})
        config = resolve_run_config(None, {"model.slices_per_modality": 1, "preprocess.slices_per_modality": 1})
        assert config.model.slices_per_modality == 1

    def test_invalid_model_is_config_error(self) -> None:
        """Test that model problems surface as ConfigError during resolution."""
        with pytest.raises(ConfigError, match="model"):
            resolve_run_config(None, {"model.transformer_heads": 3})

    @pytest.mark.parametrize(
        "overrides",
        [{"train.freeze_epochs": 200}, {"train.batch_size": 0}, {"train.learning_rate": 0.0}, {"workers": -1}, {"split_ratios": [0.5, 0.5]}],
    )
    def test_invalid_values(self, overrides: dict) -> None:
        """Test that out-of-range values are rejected."""
        with pytest.raises(ConfigError):
            resolve_run_config(None, overrides)

    @pytest.mark.parametrize(
        "payload,key",
        [
            ({"train": {"epochs": "x"}}, "train.epochs"),
            ({"model": {"encoder_widths": [4, "8", 16, 32]}}, "model.encoder_widths"),
            ({"seed": 1.5}, "seed"),
            ({"train": {"augment": {"p_hflip": True}}}, "train.augment.p_hflip"),
            ({"model": 5}, "model"),
            ({"phantom": {"shape": [48, 48]}}, "phantom.shape"),
        ],
    )
    def test_wrong_types_in_file(self, tmp_path: Path, payload: dict, key: str) -> None:
        """Test that a wrongly typed file value is a ConfigError naming the key."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ConfigError, match=re.escape(key)):
            resolve_run_config(path)

    def test_ints_widen_to_floats(self, tmp_path: Path) -> None:
        """Test that an integer learning rate is accepted as a float."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"train": {"learning_rate": 1}, "split_ratios": [1, 0, 0]}))
        config = resolve_run_config(path)
        assert config.train.learning_rate == 1.0 and isinstance(config.train.learning_rate, float)
        assert config.split_ratios == (1.0, 0.0, 0.0)

    def test_phantom_section(self, tmp_path: Path) -> None:
        """Test that the phantom section layers like the others."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"phantom": {"n_cases": 4, "lesion_count_range": [0, 1], "dwi_lesion_contrast": 50}}))
        config = resolve_run_config(path, {"phantom.seed": 9})
        assert isinstance(config.phantom, PhantomSpec)
        assert config.phantom.n_cases == 4
        assert config.phantom.lesion_count_range == (0, 1)
        assert config.phantom.dwi_lesion_contrast == 50.0
        assert config.phantom.seed == 9
        assert config.phantom.shape == (48, 48, 16)

    def test_invalid_phantom_value(self) -> None:
        """Test that a PhantomSpec violation surfaces as ConfigError."""
        with pytest.raises(ConfigError, match="noise_sigma"):
            resolve_run_config(None, {"phantom.noise_sigma": -1.0})

    def test_save_round_trip(self, tmp_path: Path) -> None:
        """Test that a saved configuration resolves back to itself."""
        config = resolve_run_config(None, {"dataset_root": "data", "train.epochs": 3, "model.variant": "single_encoder"})
        path = config.save(tmp_path / "run_config.json")
        assert resolve_run_config(path) == config


class TestSections:
    """Test individual config sections."""

    def test_model_round_trip(self) -> None:
        """Test ModelConfig dict conversion."""
        config = ModelConfig(variant=Variant.SINGLE_ENCODER, slices_per_modality=1)
        data = config.to_dict()
        assert data["variant"] == "single_encoder"
        assert ModelConfig.from_dict(data) == config

    def test_model_validation(self) -> None:
        """Test that ModelConfig.validate raises ModelConfigError."""
        with pytest.raises(ModelConfigError):
            ModelConfig(slices_per_modality=5).validate()

    def test_train_round_trip(self) -> None:
        """Test TrainConfig dict conversion with the nested augment section."""
        config = TrainConfig(epochs=3)
        assert TrainConfig.from_dict(config.to_dict()) == config

    def test_bad_rotation(self) -> None:
        """Test that rotations other than right angles are rejected."""
        with pytest.raises(ConfigError, match="rotation_choices"):
            resolve_run_config(None, {"train.augment.rotation_choices": [0, 45]})

    def test_fingerprint(self) -> None:
        """Test that the fingerprint is stable and sensitive to changes."""
        a = config_fingerprint(ModelConfig(), PreprocessConfig())
        assert a == config_fingerprint(ModelConfig(), PreprocessConfig())
        assert a != config_fingerprint(ModelConfig(slices_per_modality=1), PreprocessConfig(slices_per_modality=1))
        assert len(a) == 16

    def test_run_config_from_dict_unknown(self) -> None:
        """Test that RunConfig.from_dict rejects unknown top-level keys."""
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"epochs": 3})
