#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created numerically stable BCE-with-logits objective with shape/binary checks
# - Added SampleDataset with per-(seed, epoch, index) augmentation streams
# - Batches follow a seeded per-epoch permutation, independent of loader workers
# - Added two-stage schedule: encoder groups frozen for freeze_epochs, then full fine-tuning
# - Validation loss (augmentation off) selects best.ckpt; last.ckpt saved every epoch
# - Added CSV metric log read/write and the epoch hook point for experiment trackers
#

"""Training loop, objective and metric log."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset

from .augment import augment_sample
from .checkpoint import save_checkpoint
from .config import AugmentConfig, TrainConfig, write_json
from .errors import TrainingError
from .evaluate import dice_counts, pooled_dice
from .logs import get_logger
from .nets import SegModel
from .records import SampleRecord
from .sample_io import read_sample

logger = get_logger(__name__)

PathLike = Union[str, Path]
SampleSource = Union[SampleRecord, PathLike]

METRIC_LOG_NAME = "metrics.csv"
METRIC_COLUMNS = ("epoch", "stage", "train_loss", "val_loss", "val_dice")
BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
STAGE_FREEZE = "freeze"
STAGE_FINETUNE = "finetune"


def bce_with_logits_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy over every pixel, computed from logits.

    Uses ``max(z, 0) - z * t + log(1 + exp(-|z|))`` so large ``|z|`` never overflows.

    Raises:
        ValueError: On shape mismatch or non-binary targets
    """
    if logits.shape != targets.shape:
        raise ValueError(f"logits shape {tuple(logits.shape)} does not match targets shape {tuple(targets.shape)}")
    if not bool(((targets == 0) | (targets == 1)).all()):
        raise ValueError("targets must be binary (0 or 1)")
    return F.binary_cross_entropy_with_logits(logits, targets.to(logits.dtype), reduction="mean")


def record_to_tensors(record: SampleRecord) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(H, W, S) stacks to channel-first (S, H, W) tensors; target to (1, H, W)."""
    dwi = torch.from_numpy(np.ascontiguousarray(record.dwi_stack.transpose(2, 0, 1), dtype=np.float32))
    adc = torch.from_numpy(np.ascontiguousarray(record.adc_stack.transpose(2, 0, 1), dtype=np.float32))
    target = torch.from_numpy(np.ascontiguousarray(record.target, dtype=np.float32)).unsqueeze(0)
    return dwi, adc, target


class SampleDataset(Dataset):  # type: ignore[type-arg]
    """Samples from files or in-memory records, optionally augmented.

    The augmentation stream of item ``i`` in epoch ``e`` is seeded by
    ``(seed, e, i)``, so results do not depend on which worker loads it.
    """

    def __init__(self, samples: Sequence[SampleSource], augment: Optional[AugmentConfig] = None, seed: int = 0) -> None:
        self.samples = list(samples)
        self.augment = augment
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.samples)

    def record(self, index: int) -> SampleRecord:
        source = self.samples[index]
        if isinstance(source, SampleRecord):
            return source
        return read_sample(source)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        record = self.record(index)
        if self.augment is not None:
            record = augment_sample(record, np.random.default_rng([self.seed, self.epoch, index]), self.augment)
        return record_to_tensors(record)


def epoch_permutation(n: int, seed: int, epoch: int) -> List[int]:
    """Seeded shuffle order of one epoch."""
    return [int(i) for i in np.random.default_rng([seed, epoch]).permutation(n)]


@dataclass
class EpochMetrics:
    """One row of the metric log."""

    epoch: int
    stage: str
    train_loss: float
    val_loss: float
    val_dice: float


@dataclass
class TrainResult:
    """Outcome of train_loop."""

    best_checkpoint: Path
    last_checkpoint: Path
    metric_log: Path
    best_epoch: int
    best_val_loss: float
    history: List[EpochMetrics] = field(default_factory=list)


class EpochHook(Protocol):
    """Hook point for experiment trackers and tests."""

    def on_epoch_end(self, metrics: EpochMetrics, model: SegModel) -> None: ...


def write_metric_log(path: PathLike, history: Sequence[EpochMetrics]) -> Path:
    """Write the per-epoch CSV log (floats in shortest round-trip form)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in history:
            writer.writerow([row.epoch, row.stage, repr(float(row.train_loss)), repr(float(row.val_loss)), repr(float(row.val_dice))])
    return path


def read_metric_log(path: PathLike) -> List[EpochMetrics]:
    """Parse a metric log written by write_metric_log."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"metric log not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(METRIC_COLUMNS)}")
        return [
            EpochMetrics(
                epoch=int(row["epoch"]),
                stage=row["stage"],
                train_loss=float(row["train_loss"]),
                val_loss=float(row["val_loss"]),
                val_dice=float(row["val_dice"]),
            )
            for row in reader
        ]


def _loader(dataset: SampleDataset, order: Sequence[int], batch_size: int, workers: int) -> DataLoader:  # type: ignore[type-arg]
    return DataLoader(dataset, batch_size=batch_size, sampler=list(order), num_workers=workers, drop_last=False)


@torch.no_grad()
def validate(model: SegModel, dataset: SampleDataset, batch_size: int, workers: int = 0) -> Tuple[float, float]:
    """Validation loss (mean over pixels) and pooled Dice at logit threshold 0."""
    model.eval()
    total_loss = 0.0
    total = 0
    counts = []
    for dwi, adc, target in _loader(dataset, range(len(dataset)), batch_size, workers):
        logits = model(dwi, adc)
        total_loss += float(bce_with_logits_loss(logits, target)) * target.shape[0]
        total += target.shape[0]
        counts.append(dice_counts((logits > 0).numpy(), target.numpy() > 0.5))
    return total_loss / total, pooled_dice(counts)


def _check_samples(name: str, samples: Sequence[SampleSource], model: SegModel) -> SampleDataset:
    if not samples:
        raise TrainingError(f"{name} sample set is empty")
    dataset = SampleDataset(samples)
    s = dataset.record(0).slices_per_modality
    if s != model.config.slices_per_modality:
        raise TrainingError(f"{name} samples stack {s} slice(s) per modality but the model expects {model.config.slices_per_modality}")
    return dataset


def train_loop(
    model: SegModel,
    train_samples: Sequence[SampleSource],
    val_samples: Sequence[SampleSource],
    config: TrainConfig,
    run_dir: PathLike,
    workers: int = 0,
    hooks: Sequence[EpochHook] = (),
) -> TrainResult:
    """Two-stage training with validation-loss model selection.

    Epochs ``1..freeze_epochs`` update only non-encoder groups; later epochs
    update everything. After each epoch the validation loss is computed without
    augmentation; the epoch with the lowest loss is kept as ``best.ckpt``.

    Args:
        model: Freshly built or restored SegModel
        train_samples: Sample files or records used for optimisation
        val_samples: Sample files or records used for selection
        config: Training schedule
        run_dir: Output directory for checkpoints, configs and the metric log
        workers: DataLoader worker processes
        hooks: Objects notified after every epoch

    Returns:
        TrainResult pointing at the best checkpoint and holding the metric history

    Raises:
        TrainingError: On empty sample sets, an S mismatch or a non-finite loss
    """
    config.validate()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_json(run_dir / "train_config.json", config.to_dict())
    write_json(run_dir / "model_config.json", model.config.to_dict())

    _check_samples("train", train_samples, model)
    val_set = _check_samples("validation", val_samples, model)
    train_set = SampleDataset(train_samples, augment=config.augment if config.augment_enabled else None, seed=config.seed)

    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)

    best_path = run_dir / BEST_CHECKPOINT
    last_path = run_dir / LAST_CHECKPOINT
    log_path = run_dir / METRIC_LOG_NAME
    history: List[EpochMetrics] = []
    best_loss = math.inf
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        frozen = epoch <= config.freeze_epochs
        stage = STAGE_FREEZE if frozen else STAGE_FINETUNE
        model.set_encoder_trainable(not frozen)
        model.train()
        train_set.set_epoch(epoch)

        running = 0.0
        seen = 0
        order = epoch_permutation(len(train_set), config.seed, epoch)
        for batch_index, (dwi, adc, target) in enumerate(_loader(train_set, order, config.batch_size, workers)):
            optimizer.zero_grad(set_to_none=True)
            loss = bce_with_logits_loss(model(dwi, adc), target)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_index}")
            loss.backward()
            optimizer.step()
            running += float(loss) * target.shape[0]
            seen += target.shape[0]

        val_loss, val_dice = validate(model, val_set, config.batch_size, workers)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        metrics = EpochMetrics(epoch=epoch, stage=stage, train_loss=running / seen, val_loss=val_loss, val_dice=val_dice)
        history.append(metrics)
        logger.info("epoch %d/%d [%s] train_loss=%.5f val_loss=%.5f val_dice=%.4f", epoch, config.epochs, stage, metrics.train_loss, val_loss, val_dice)

        state = {"epoch": epoch, "stage": stage, "train_loss": metrics.train_loss, "val_loss": val_loss, "val_dice": val_dice}
        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            save_checkpoint(model, best_path, state)
            logger.debug("new best checkpoint at epoch %d", epoch)
        save_checkpoint(model, last_path, state)
        write_metric_log(log_path, history)

        for hook in hooks:
            hook.on_epoch_end(metrics, model)

    model.set_encoder_trainable(True)
    logger.info("best epoch %d with val_loss=%.5f", best_epoch, best_loss)
    return TrainResult(
        best_checkpoint=best_path,
        last_checkpoint=last_path,
        metric_log=log_path,
        best_epoch=best_epoch,
        best_val_loss=best_loss,
        history=history,
    )


__all__ = [
    "bce_with_logits_loss",
    "SampleDataset",
    "record_to_tensors",
    "epoch_permutation",
    "EpochMetrics",
    "TrainResult",
    "EpochHook",
    "write_metric_log",
    "read_metric_log",
    "validate",
    "train_loop",
    "METRIC_COLUMNS",
]
