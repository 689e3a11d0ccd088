#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created ModelConfig, AugmentConfig, TrainConfig, PreprocessConfig and RunConfig dataclasses
# - Added to_dict/from_dict with unknown-key rejection
# - Added layered resolution: defaults <- JSON config file <- dotted flag overrides
# - Added configuration fingerprint over model + preprocess settings
# - Tied model and preprocess slices_per_modality together at resolution time
# - from_dict coerces and type-checks every field, raising ConfigError on mismatches
# - Added the phantom section (PhantomSpec) so phantom settings layer like the rest
#

"""Configuration dataclasses and the layered run configuration resolver."""

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type, Union, get_args, get_origin

from .errors import ConfigError, ModelConfigError
from .phantom import PhantomSpec

INPUT_HW = 128
ALLOWED_ROTATIONS = (0, 90, 180, 270)
ALLOWED_SLICES = (1, 3)
ROOT_SECTION = "run configuration"


class Variant(str, Enum):
    """Architecture variant selector."""

    SINGLE_ENCODER = "single_encoder"
    DUAL_ENCODER = "dual_encoder"


def _check_keys(cls: Type[Any], data: Mapping[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _coerce(kind: Any, value: Any, name: str) -> Any:
    """Check ``value`` against a field annotation, converting ints to floats and lists to tuples."""
    origin = get_origin(kind)
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    elif origin is Union:
        if value is None and type(None) in get_args(kind):
            return None
        inner = [arg for arg in get_args(kind) if arg is not type(None)]
        return _coerce(inner[0], value, name)
    elif origin in (list, tuple):
        if isinstance(value, (list, tuple)):
            args = get_args(kind)
            if origin is list:
                return [_coerce(args[0], v, name) for v in value]
            if len(args) == 2 and args[1] is Ellipsis:
                return tuple(_coerce(args[0], v, name) for v in value)
            if len(value) == len(args):
                return tuple(_coerce(a, v, name) for a, v in zip(args, value))
            raise ConfigError(f"{name} must hold {len(args)} values, got {list(value)}")
    else:
        # Enums and nested sections convert themselves.
        return value
    expected = getattr(kind, "__name__", str(kind)) if origin is None else f"a list of {getattr(get_args(kind)[0], '__name__', 'values')}"
    raise ConfigError(f"{name} must be {expected}, got {value!r}")


def _typed_values(cls: Type[Any], data: Any, section: str) -> Dict[str, Any]:
    """Known-key, type-checked copy of one configuration section."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"{section} must be a JSON object, got {data!r}")
    _check_keys(cls, data, section)
    values = dict(data)
    for f in fields(cls):
        if f.name in values:
            label = f.name if section == ROOT_SECTION else f"{section}.{f.name}"
            values[f.name] = _coerce(f.type, values[f.name], label)
    return values


@dataclass
class ModelConfig:
    """Architecture selector plus every network hyperparameter."""

    variant: Variant = Variant.DUAL_ENCODER
    slices_per_modality: int = 3
    encoder_widths: List[int] = field(default_factory=lambda: [32, 64, 128, 256])
    transformer_layers: int = 4
    transformer_heads: int = 4
    transformer_dim: int = 256
    fusion_proj_width: int = 256
    input_hw: int = INPUT_HW
    dropout: float = 0.0
    init_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.variant, Variant):
            try:
                self.variant = Variant(self.variant)
            except ValueError:
                raise ModelConfigError(f"variant must be one of {[v.value for v in Variant]}, got {self.variant!r}") from None
        self.encoder_widths = [int(w) for w in self.encoder_widths]

    def validate(self) -> "ModelConfig":
        """Check invariants, raising ModelConfigError naming the violated one."""
        if self.slices_per_modality not in ALLOWED_SLICES:
            raise ModelConfigError(f"slices_per_modality must be in {ALLOWED_SLICES}, got {self.slices_per_modality}")
        if len(self.encoder_widths) != 4:
            raise ModelConfigError(f"encoder_widths must list 4 stage widths, got {len(self.encoder_widths)}")
        if any(w < 1 for w in self.encoder_widths) or any(b <= a for a, b in zip(self.encoder_widths, self.encoder_widths[1:])):
            raise ModelConfigError(f"encoder_widths must be positive and strictly increasing, got {self.encoder_widths}")
        if self.transformer_layers < 1:
            raise ModelConfigError(f"transformer_layers must be >= 1, got {self.transformer_layers}")
        if self.transformer_heads < 1 or self.transformer_dim % self.transformer_heads != 0:
            raise ModelConfigError(f"transformer_dim ({self.transformer_dim}) must be divisible by transformer_heads ({self.transformer_heads})")
        if self.fusion_proj_width < 1:
            raise ModelConfigError(f"fusion_proj_width must be >= 1, got {self.fusion_proj_width}")
        if self.input_hw != INPUT_HW:
            raise ModelConfigError(f"input_hw is fixed at {INPUT_HW}, got {self.input_hw}")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        return self

    @property
    def is_dual(self) -> bool:
        return self.variant is Variant.DUAL_ENCODER

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["variant"] = self.variant.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        return cls(**_typed_values(cls, data, "model"))


@dataclass
class AugmentConfig:
    """Paired image/mask augmentation settings."""

    p_hflip: float = 0.5
    p_vflip: float = 0.5
    rotation_choices: Tuple[int, ...] = ALLOWED_ROTATIONS
    out_hw: int = INPUT_HW

    def __post_init__(self) -> None:
        self.rotation_choices = tuple(int(r) for r in self.rotation_choices)

    def validate(self) -> "AugmentConfig":
        for name in ("p_hflip", "p_vflip"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"augment.{name} must be in [0, 1], got {p}")
        if not self.rotation_choices:
            raise ConfigError("augment.rotation_choices must not be empty")
        bad = [r for r in self.rotation_choices if r not in ALLOWED_ROTATIONS]
        if bad:
            raise ConfigError(f"augment.rotation_choices must be a subset of {ALLOWED_ROTATIONS}, got {bad}")
        if self.out_hw != INPUT_HW:
            raise ConfigError(f"augment.out_hw is fixed at {INPUT_HW}, got {self.out_hw}")
        return self

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AugmentConfig":
        return cls(**_typed_values(cls, data, "train.augment"))


@dataclass
class TrainConfig:
    """Optimisation schedule. Model selection always uses validation loss."""

    batch_size: int = 16
    epochs: int = 100
    freeze_epochs: int = 5
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    seed: int = 0
    augment_enabled: bool = True
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    select_metric = "val_loss"

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.freeze_epochs <= self.epochs:
            raise ConfigError(f"train.freeze_epochs must satisfy 0 <= freeze_epochs <= epochs, got {self.freeze_epochs} (epochs={self.epochs})")
        if self.learning_rate <= 0:
            raise ConfigError(f"train.learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"train.weight_decay must be >= 0, got {self.weight_decay}")
        self.augment.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["augment"]["rotation_choices"] = list(self.augment.rotation_choices)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        values = _typed_values(cls, data, "train")
        if "augment" in values and not isinstance(values["augment"], AugmentConfig):
            values["augment"] = AugmentConfig.from_dict(values["augment"])
        return cls(**values)


@dataclass
class PreprocessConfig:
    """Slice extraction settings."""

    slices_per_modality: int = 3
    signal_threshold: float = 0.01
    out_hw: int = INPUT_HW

    def validate(self) -> "PreprocessConfig":
        if self.slices_per_modality not in ALLOWED_SLICES:
            raise ConfigError(f"preprocess.slices_per_modality must be in {ALLOWED_SLICES}, got {self.slices_per_modality}")
        if self.out_hw < 1:
            raise ConfigError(f"preprocess.out_hw must be >= 1, got {self.out_hw}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PreprocessConfig":
        return cls(**_typed_values(cls, data, "preprocess"))


@dataclass
class RunConfig:
    """Everything one CLI invocation needs. Only dataset_root lacks a default."""

    dataset_root: Optional[str] = None
    run_dir: Optional[str] = None
    seed: int = 0
    workers: int = 0
    split_ratios: Tuple[float, float, float] = (0.64, 0.16, 0.20)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    phantom: PhantomSpec = field(default_factory=PhantomSpec)

    def validate(self) -> "RunConfig":
        if self.workers < 0:
            raise ConfigError(f"workers must be >= 0, got {self.workers}")
        if len(self.split_ratios) != 3:
            raise ConfigError(f"split_ratios must hold three fractions, got {list(self.split_ratios)}")
        try:
            self.model.validate()
        except ModelConfigError as exc:
            raise ConfigError(f"model: {exc}") from exc
        self.train.validate()
        self.preprocess.validate()
        if self.model.slices_per_modality != self.preprocess.slices_per_modality:
            raise ConfigError(
                f"model.slices_per_modality ({self.model.slices_per_modality}) differs from preprocess.slices_per_modality ({self.preprocess.slices_per_modality})"
            )
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset_root": self.dataset_root,
            "run_dir": self.run_dir,
            "seed": self.seed,
            "workers": self.workers,
            "split_ratios": list(self.split_ratios),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "preprocess": self.preprocess.to_dict(),
            "phantom": self.phantom.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        values = _typed_values(cls, data, ROOT_SECTION)
        try:
            if "model" in values:
                values["model"] = ModelConfig.from_dict(values["model"])
            if "train" in values:
                values["train"] = TrainConfig.from_dict(values["train"])
            if "preprocess" in values:
                values["preprocess"] = PreprocessConfig.from_dict(values["preprocess"])
            if "phantom" in values and not isinstance(values["phantom"], PhantomSpec):
                values["phantom"] = PhantomSpec(**_typed_values(PhantomSpec, values["phantom"], "phantom"))
            return cls(**values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def save(self, path: Union[str, Path]) -> Path:
        """Write the resolved configuration as JSON."""
        return write_json(path, self.to_dict())


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    node = target
    parts = dotted.split(".")
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError(f"unknown configuration key: {dotted}")
        node = child
    if parts[-1] not in node:
        raise ConfigError(f"unknown configuration key: {dotted}")
    node[parts[-1]] = value


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON configuration file into a dict."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def resolve_run_config(config_file: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Resolve defaults <- config file <- dotted overrides (rightmost wins).

    Args:
        config_file: Optional JSON file with a (partial) RunConfig layout
        overrides: Mapping of dotted keys (``train.epochs``) to values, usually from flags

    Returns:
        The validated RunConfig
    """
    resolved = RunConfig().to_dict()
    if config_file is not None:
        file_data = load_config_file(config_file)
        _merge(resolved, file_data)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(resolved, dotted, value)
    return RunConfig.from_dict(resolved).validate()


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_fingerprint(model: ModelConfig, preprocess: PreprocessConfig) -> str:
    """Short stable hash identifying a model + preprocess configuration."""
    payload = canonical_json({"model": model.to_dict(), "preprocess": preprocess.to_dict()})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write indented UTF-8 JSON terminated by a newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


__all__ = [
    "Variant",
    "ModelConfig",
    "AugmentConfig",
    "TrainConfig",
    "PreprocessConfig",
    "RunConfig",
    "resolve_run_config",
    "load_config_file",
    "config_fingerprint",
    "canonical_json",
    "write_json",
    "INPUT_HW",
]
