#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created self-describing checkpoint archive: format tag, ModelConfig, state dict, training state
# - Checkpoints are written atomically and loaded with weights_only=True
#

"""Model checkpoint save/load."""

import io
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import torch

from .config import ModelConfig
from .errors import StrokeSegError
from .nets import SegModel, build_model
from .volume_io import atomic_write_bytes

PathLike = Union[str, Path]

CHECKPOINT_FORMAT = "strokeseg-checkpoint-1"


def save_checkpoint(model: SegModel, path: PathLike, training_state: Optional[Dict[str, Any]] = None) -> Path:
    """Write parameters, model config and JSON-compatible training state to one archive."""
    archive = {
        "format": CHECKPOINT_FORMAT,
        "model_config": model.config.to_dict(),
        "state_dict": {k: v.detach().cpu().clone() for k, v in model.state_dict().items()},
        "training_state": dict(training_state or {}),
    }
    buffer = io.BytesIO()
    torch.save(archive, buffer)
    return atomic_write_bytes(path, buffer.getvalue())


def load_checkpoint(path: PathLike) -> Tuple[SegModel, Dict[str, Any]]:
    """Rebuild the model stored in a checkpoint.

    Returns:
        (model in eval mode, training state dict)

    Raises:
        FileNotFoundError: If the checkpoint does not exist
        StrokeSegError: If the file is not a strokeseg checkpoint
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        archive = torch.load(str(path), map_location="cpu", weights_only=True)
    except Exception as e:
        raise StrokeSegError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(archive, dict) or archive.get("format") != CHECKPOINT_FORMAT:
        raise StrokeSegError(f"{path} is not a {CHECKPOINT_FORMAT} archive")

    model = build_model(ModelConfig.from_dict(archive["model_config"]))
    model.load_state_dict(archive["state_dict"])
    model.eval()
    return model, dict(archive.get("training_state", {}))


__all__ = ["save_checkpoint", "load_checkpoint", "CHECKPOINT_FORMAT"]
