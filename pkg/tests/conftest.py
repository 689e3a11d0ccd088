#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Added copyright header
# - Added fixtures for tiny model configurations of every variant
# - Added phantom dataset fixtures written to tmp_path
# - Added type annotations to all functions and fixtures
#

"""Pytest configuration for strokeseg tests."""

import os
import sys
from pathlib import Path
from typing import Callable, List

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from strokeseg.config import ModelConfig, PreprocessConfig, Variant  # noqa: E402
from strokeseg.phantom import PhantomSpec, write_phantom_dataset  # noqa: E402

TINY_WIDTHS = [4, 8, 16, 32]


def pytest_configure(config: pytest.Config) -> None:
    """Keep torch single-threaded so results do not depend on the host."""
    os.environ["PYTHONDONTWRITEBYTECODE"] = "1"
    os.environ["PYTHONUNBUFFERED"] = "1"
    import torch

    torch.set_num_threads(1)


@pytest.fixture
def tiny_config() -> Callable[..., ModelConfig]:
    """Factory for small models that build and run fast on CPU."""

    def make(variant: Variant = Variant.DUAL_ENCODER, slices: int = 3, init_seed: int = 0) -> ModelConfig:
        return ModelConfig(
            variant=variant,
            slices_per_modality=slices,
            encoder_widths=list(TINY_WIDTHS),
            transformer_layers=1,
            transformer_heads=2,
            transformer_dim=16,
            fusion_proj_width=16,
            init_seed=init_seed,
        )

    return make


@pytest.fixture
def small_phantom_spec() -> PhantomSpec:
    """Six small phantom cases."""
    return PhantomSpec(n_cases=6, shape=(24, 24, 10), lesion_radius_range=(2.0, 4.0), seed=3)


@pytest.fixture
def phantom_root(tmp_path: Path, small_phantom_spec: PhantomSpec) -> Path:
    """A phantom dataset root on disk."""
    root = tmp_path / "dataset"
    write_phantom_dataset(small_phantom_spec, root)
    return root


@pytest.fixture
def phantom_case_ids(phantom_root: Path, small_phantom_spec: PhantomSpec) -> List[str]:
    """Case IDs written by the phantom_root fixture."""
    return [f"case{i:03d}" for i in range(small_phantom_spec.n_cases)]


@pytest.fixture
def preprocess_config() -> PreprocessConfig:
    return PreprocessConfig()
