#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created Dice metric with empty/empty = 1.0 and one-sided-empty = 0.0 conventions
# - Added count-based bookkeeping (dice_counts, pooled_dice) and per-slice overlap counts
# - Added predict_case: every valid center slice is predicted, resized back and stacked
# - Added evaluate_split producing an EvalReport with volume-level per-case Dice
# - Added EvalReport JSON round-trip and the "Model configuration | Dice Score (%)" rich table
# - Added NIfTI export of predictions in the cropped grid
#

"""Dice metric, volume reassembly and evaluation reports."""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from rich.table import Table

from .config import ModelConfig, PreprocessConfig, Variant, config_fingerprint
from .errors import ConfigError, DatasetError
from .logs import get_logger
from .preprocess import extract_samples, prepare_case, resize_mask
from .records import CaseVolume
from .volume_io import load_case, save_nifti

logger = get_logger(__name__)

PathLike = Union[str, Path]
Counts = Tuple[int, int, int]


def _as_binary(name: str, array: Any) -> np.ndarray:
    values = np.asarray(array)
    if values.dtype == np.bool_:
        return values
    if not np.isin(values, (0, 1)).all():
        raise ValueError(f"{name} must be binary (0/1 or bool)")
    return values.astype(bool)


def dice_counts(pred: Any, gt: Any) -> Counts:
    """Return ``(|P ∩ G|, |P|, |G|)`` for two binary arrays of equal shape.

    Raises:
        ValueError: On shape mismatch or non-binary input
    """
    p = _as_binary("prediction", pred)
    g = _as_binary("ground truth", gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: prediction {p.shape} vs ground truth {g.shape}")
    return int(np.count_nonzero(p & g)), int(np.count_nonzero(p)), int(np.count_nonzero(g))


def pooled_dice(counts: Iterable[Counts]) -> float:
    """Dice from summed counts; 1.0 when both sides are empty."""
    intersection = 0
    size_pred = 0
    size_gt = 0
    for i, p, g in counts:
        intersection += i
        size_pred += p
        size_gt += g
    if size_pred + size_gt == 0:
        return 1.0
    return 2.0 * intersection / (size_pred + size_gt)


def dice(pred: Any, gt: Any) -> float:
    """Dice similarity ``2|P ∩ G| / (|P| + |G|)``.

    Both empty gives 1.0, exactly one empty gives 0.0.

    Raises:
        ValueError: On shape mismatch or non-binary input
    """
    return pooled_dice([dice_counts(pred, gt)])


def slice_overlap_counts(pred: Any, gt: Any) -> List[Counts]:
    """Per-slice counts along the last axis of two 3D volumes."""
    p = _as_binary("prediction", pred)
    g = _as_binary("ground truth", gt)
    if p.shape != g.shape or p.ndim != 3:
        raise ValueError(f"expected two 3D volumes of equal shape, got {p.shape} and {g.shape}")
    return [dice_counts(p[:, :, k], g[:, :, k]) for k in range(p.shape[2])]


def slice_averaged_dice(pred: Any, gt: Any) -> float:
    """Mean of per-slice Dice values. Kept for comparison; reports use volume-level Dice."""
    return float(np.mean([pooled_dice([c]) for c in slice_overlap_counts(pred, gt)]))


def _logit_cutoff(threshold: float) -> float:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return math.log(threshold / (1.0 - threshold))


def _check_model(model: torch.nn.Module, config: PreprocessConfig) -> None:
    model_config: ModelConfig = getattr(model, "config")
    if model_config.slices_per_modality != config.slices_per_modality:
        raise ConfigError(f"model expects S={model_config.slices_per_modality} but preprocessing uses S={config.slices_per_modality}")


@torch.no_grad()
def predict_prepared(
    model: torch.nn.Module,
    cropped: CaseVolume,
    config: Optional[PreprocessConfig] = None,
    threshold: float = 0.5,
    batch_size: int = 16,
) -> np.ndarray:
    """Predict an already normalized and cropped case; returns a uint8 volume of the same shape."""
    config = config or PreprocessConfig()
    _check_model(model, config)
    cutoff = _logit_cutoff(threshold)
    # origin_k=0: center_slice indexes the cropped grid.
    samples = extract_samples(cropped, config.slices_per_modality, config.signal_threshold, config.out_hw, apply_filter=False, origin_k=0)
    h, w, _ = cropped.shape
    prediction = np.zeros(cropped.shape, dtype=np.uint8)

    model.eval()
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        dwi = torch.from_numpy(np.stack([s.dwi_stack.transpose(2, 0, 1) for s in batch]).astype(np.float32))
        adc = torch.from_numpy(np.stack([s.adc_stack.transpose(2, 0, 1) for s in batch]).astype(np.float32))
        # sigmoid(z) > threshold  <=>  z > logit(threshold)
        positive = (model(dwi, adc)[:, 0] > cutoff).to(torch.float32).numpy()
        for record, plane in zip(batch, positive):
            prediction[:, :, record.center_slice] = resize_mask(plane, (h, w)) > 0.5
    return prediction


def predict_case(
    model: torch.nn.Module,
    case: CaseVolume,
    config: Optional[PreprocessConfig] = None,
    threshold: float = 0.5,
    batch_size: int = 16,
) -> np.ndarray:
    """Binary prediction of a raw case in its cropped grid.

    Every valid center slice is predicted (no signal filter); with S=3 the
    first and last slices stay empty.

    Raises:
        DatasetError: If the case has fewer slices than S
        ConfigError: If the model and preprocessing disagree on S
    """
    cropped, _ = prepare_case(case)
    return predict_prepared(model, cropped, config, threshold, batch_size)


@dataclass
class CaseResult:
    """Volume-level Dice of one case."""

    case_id: str
    dice: float
    lesion_voxels_gt: int
    lesion_voxels_pred: int


@dataclass
class EvalReport:
    """Per-case Dice with its mean and the configuration that produced it."""

    per_case: List[CaseResult]
    mean_dice: float
    config_fingerprint: str
    threshold: float
    model_label: str = ""
    split: str = "test"
    extras: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: Sequence[CaseResult], config_fingerprint: str, threshold: float, model_label: str = "", split: str = "test") -> "EvalReport":
        if not results:
            raise DatasetError("cannot build a report without cases")
        mean = float(sum(r.dice for r in results) / len(results))
        return cls(per_case=list(results), mean_dice=mean, config_fingerprint=config_fingerprint, threshold=threshold, model_label=model_label, split=split)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_label": self.model_label,
            "split": self.split,
            "config_fingerprint": self.config_fingerprint,
            "threshold": self.threshold,
            "mean_dice": self.mean_dice,
            "per_case": [asdict(r) for r in self.per_case],
            "extras": dict(self.extras),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        return cls(
            per_case=[CaseResult(**r) for r in data["per_case"]],
            mean_dice=float(data["mean_dice"]),
            config_fingerprint=str(data["config_fingerprint"]),
            threshold=float(data["threshold"]),
            model_label=str(data.get("model_label", "")),
            split=str(data.get("split", "test")),
            extras=dict(data.get("extras", {})),
        )

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: PathLike) -> "EvalReport":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"report not found: {path}")
        try:
            return cls.from_json(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise DatasetError(f"{path} is not an evaluation report: {e}") from e


def evaluate_case(
    model: torch.nn.Module,
    case: CaseVolume,
    config: Optional[PreprocessConfig] = None,
    threshold: float = 0.5,
    batch_size: int = 16,
) -> CaseResult:
    """Volume-level Dice of one case against its cropped ground truth."""
    cropped, _ = prepare_case(case)
    prediction = predict_prepared(model, cropped, config, threshold, batch_size)
    counts = dice_counts(prediction, cropped.mask)
    return CaseResult(case_id=case.case_id, dice=pooled_dice([counts]), lesion_voxels_gt=counts[2], lesion_voxels_pred=counts[1])


def evaluate_split(
    model: torch.nn.Module,
    case_ids: Sequence[str],
    dataset_root: PathLike,
    config: Optional[PreprocessConfig] = None,
    threshold: float = 0.5,
    workers: int = 0,
    batch_size: int = 16,
    split: str = "test",
) -> EvalReport:
    """Evaluate every case of a split.

    Args:
        model: Trained SegModel (any module with a ``config`` and the forward contract)
        case_ids: Case IDs of the split
        dataset_root: Dataset root holding the NIfTI cases
        config: Preprocessing settings used at training time
        threshold: Probability cutoff, positive iff sigmoid(z) > threshold
        workers: Cases evaluated concurrently when > 1
        batch_size: Slices per forward pass
        split: Split name recorded in the report

    Returns:
        EvalReport with per-case Dice in case_ids order

    Raises:
        DatasetError: If the split is empty
        FileNotFoundError: If a case directory is missing
    """
    config = config or PreprocessConfig()
    if not case_ids:
        raise DatasetError(f"split {split!r} has no cases")
    model_config: ModelConfig = getattr(model, "config")

    def run(case_id: str) -> CaseResult:
        result = evaluate_case(model, load_case(dataset_root, case_id), config, threshold, batch_size)
        logger.info("case %s: dice=%.4f (gt=%d, pred=%d voxels)", case_id, result.dice, result.lesion_voxels_gt, result.lesion_voxels_pred)
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, case_ids))
    else:
        results = [run(case_id) for case_id in case_ids]

    report = EvalReport.from_results(results, config_fingerprint(model_config, config), threshold, model_label(model_config), split)
    logger.info("%s: mean dice %.4f over %d case(s)", report.model_label, report.mean_dice, len(results))
    return report


def model_label(config: ModelConfig) -> str:
    """Human-readable row label, e.g. ``Dual Encoder, Three Slice``."""
    encoder = "Dual Encoder" if config.variant == Variant.DUAL_ENCODER else "Single Encoder"
    slices = "Three Slice" if config.slices_per_modality == 3 else "Single Slice"
    return f"{encoder}, {slices}"


def format_report_table(reports: Sequence[EvalReport], title: Optional[str] = None) -> Table:
    """Configuration vs mean Dice (in percent) table."""
    table = Table(title=title)
    table.add_column("Model configuration")
    table.add_column("Dice Score (%)", justify="right")
    for report in reports:
        table.add_row(report.model_label or report.config_fingerprint, f"{100.0 * report.mean_dice:.1f}")
    return table


def format_case_table(report: EvalReport) -> Table:
    table = Table(title=f"{report.model_label} ({report.split})")
    table.add_column("Case")
    table.add_column("Dice", justify="right")
    table.add_column("GT voxels", justify="right")
    table.add_column("Pred voxels", justify="right")
    for r in report.per_case:
        table.add_row(r.case_id, f"{r.dice:.4f}", str(r.lesion_voxels_gt), str(r.lesion_voxels_pred))
    return table


def write_prediction_nifti(
    model: torch.nn.Module,
    case: CaseVolume,
    out_dir: PathLike,
    config: Optional[PreprocessConfig] = None,
    threshold: float = 0.5,
) -> Path:
    """Predict one case and write ``<case_id>_pred.nii.gz`` in the cropped grid.

    The affine is the case affine with its origin moved to the crop corner.
    """
    cropped, _ = prepare_case(case)
    prediction = predict_prepared(model, cropped, config, threshold)
    path = save_nifti(prediction, Path(out_dir) / f"{case.case_id}_pred.nii.gz", cropped.affine)
    logger.info("case %s: wrote %s (%d positive voxels)", case.case_id, path, int(prediction.sum()))
    return path


__all__ = [
    "dice",
    "dice_counts",
    "pooled_dice",
    "slice_overlap_counts",
    "slice_averaged_dice",
    "predict_case",
    "predict_prepared",
    "evaluate_case",
    "evaluate_split",
    "CaseResult",
    "EvalReport",
    "model_label",
    "format_report_table",
    "format_case_table",
    "write_prediction_nifti",
]
