#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created public API re-exporting the pipeline entry points
# - Heavy modules (torch, nibabel) are imported lazily on first attribute access
#

"""
strokeseg - ischemic stroke lesion segmentation on paired DWI/ADC MRI.

Single- and dual-encoder TransUNet variants over 2.5D slice stacks, with
NIfTI loading, preprocessing, a synthetic phantom generator, a two-stage
training loop and Dice evaluation.
"""

import importlib
from typing import Any

__version__ = "0.1.0"  # Follow semantic versioning

_EXPORTS = {
    "CaseVolume": "records",
    "SampleRecord": "records",
    "BoundingBox3D": "records",
    "load_case": "volume_io",
    "discover_cases": "volume_io",
    "make_split": "volume_io",
    "SplitManifest": "volume_io",
    "preprocess_case": "preprocess",
    "extract_samples": "preprocess",
    "nonzero_bbox": "preprocess",
    "PhantomSpec": "phantom",
    "generate_case": "phantom",
    "ModelConfig": "config",
    "TrainConfig": "config",
    "AugmentConfig": "config",
    "PreprocessConfig": "config",
    "RunConfig": "config",
    "Variant": "config",
    "build_model": "nets",
    "SegModel": "nets",
    "parameter_groups": "nets",
    "save_checkpoint": "checkpoint",
    "load_checkpoint": "checkpoint",
    "bce_with_logits_loss": "train",
    "train_loop": "train",
    "augment_sample": "augment",
    "dice": "evaluate",
    "predict_case": "evaluate",
    "evaluate_split": "evaluate",
    "EvalReport": "evaluate",
    "StrokeSegError": "errors",
}


def __getattr__(name: str) -> Any:
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'strokeseg' has no attribute {name!r}")
    return getattr(importlib.import_module(f".{module}", __name__), name)


__all__ = sorted(_EXPORTS) + ["__version__"]
