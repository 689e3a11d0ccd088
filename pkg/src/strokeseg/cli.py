#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created strokeseg command line with subcommands phantom, split, preprocess, train, evaluate, predict
# - Added inspect (Textual run browser) and compare (report table) subcommands
# - Configuration is resolved as defaults <- --config JSON <- flags and saved before training starts
# - Usage errors exit 1 with usage text, runtime errors exit 2 with a single diagnostic line
# - Run directory comes from --run-dir, the config file, STROKESEG_RUN_DIR or runs/<timestamp>
# - phantom resolves its PhantomSpec through the layered configuration
# - evaluate always writes its report, next to the checkpoint when no run directory is given
#

"""Command line entry point."""

import argparse
import dataclasses
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence, Tuple

from rich.console import Console

from . import __version__
from .checkpoint import load_checkpoint
from .config import RunConfig, resolve_run_config, write_json
from .errors import StrokeSegError, UsageError
from .evaluate import EvalReport, evaluate_split, format_case_table, format_report_table, write_prediction_nifti
from .logs import configure_logging, get_logger
from .nets import build_model, count_parameters
from .phantom import write_phantom_dataset
from .preprocess import preprocess_manifest
from .sample_io import read_index
from .train import train_loop
from .volume_io import SPLIT_NAMES, dataset_fingerprint, discover_cases, load_case, make_split, read_manifest, write_manifest

logger = get_logger(__name__)

PROG = "strokeseg"
RUN_DIR_ENV = "STROKESEG_RUN_DIR"
RUN_CONFIG_NAME = "run_config.json"
MANIFEST_NAME = "split.json"


class StrokesegArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


def _float_list(text: str, count: int) -> Tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}") from None
    if len(values) != count:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}")
    return values


def parse_ratios(text: str) -> Tuple[float, ...]:
    return _float_list(text, 3)


def parse_shape(text: str) -> Tuple[int, int, int]:
    values = _float_list(text, 3)
    if any(v != int(v) or v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"shape must be three positive integers, got {text!r}")
    return int(values[0]), int(values[1]), int(values[2])


def parse_count_range(text: str) -> Tuple[int, int]:
    values = _float_list(text, 2)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected two integers, got {text!r}")
    return int(values[0]), int(values[1])


def parse_radius_range(text: str) -> Tuple[float, float]:
    values = _float_list(text, 2)
    return values[0], values[1]


def resolve_run_dir(configured: Optional[str]) -> Path:
    """``--run-dir``/config value, else $STROKESEG_RUN_DIR, else ``runs/<YYYYmmdd-HHMMSS>``."""
    if configured:
        return Path(configured)
    env = os.environ.get(RUN_DIR_ENV)
    if env:
        return Path(env)
    return Path("runs") / datetime.now().strftime("%Y%m%d-%H%M%S")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags onto dotted configuration keys; unset flags stay None."""
    seed = getattr(args, "seed", None)
    slices = getattr(args, "slices", None)
    no_augment = getattr(args, "no_augment", False)
    return {
        "dataset_root": getattr(args, "root", None),
        "run_dir": getattr(args, "run_dir", None),
        "seed": seed,
        "train.seed": seed,
        "model.init_seed": seed,
        "phantom.seed": seed,
        "phantom.n_cases": getattr(args, "n_cases", None),
        "phantom.shape": getattr(args, "shape", None),
        "phantom.noise_sigma": getattr(args, "noise", None),
        "phantom.lesion_count_range": getattr(args, "lesion_count", None),
        "phantom.lesion_radius_range": getattr(args, "lesion_radius", None),
        "workers": getattr(args, "workers", None),
        "split_ratios": getattr(args, "ratios", None),
        "model.variant": getattr(args, "variant", None),
        "model.slices_per_modality": slices,
        "preprocess.slices_per_modality": slices,
        "train.epochs": getattr(args, "epochs", None),
        "train.freeze_epochs": getattr(args, "freeze_epochs", None),
        "train.batch_size": getattr(args, "batch_size", None),
        "train.learning_rate": getattr(args, "lr", None),
        "train.augment_enabled": False if no_augment else None,
    }


def _config(args: argparse.Namespace, config_file: Optional[Path] = None) -> RunConfig:
    source = args.config if args.config else config_file
    config = resolve_run_config(source, _overrides(args))
    logger.debug("resolved configuration: %s", config.to_dict())
    return config


def _require_root(config: RunConfig, command: str) -> Path:
    if not config.dataset_root:
        raise UsageError(f"{command} requires --root (or dataset_root in --config)")
    return Path(config.dataset_root)


def _stdout() -> Console:
    return Console()


def cmd_phantom(args: argparse.Namespace) -> int:
    config = _config(args)
    root = _require_root(config, "phantom")
    case_ids = write_phantom_dataset(config.phantom, root)
    _stdout().print(f"wrote {len(case_ids)} phantom case(s) to {root}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    config = _config(args)
    root = _require_root(config, "split")
    case_ids = discover_cases(root)
    manifest = make_split(case_ids, config.seed, config.split_ratios, created_from=dataset_fingerprint(root, case_ids))
    out = Path(args.out) if args.out else root / MANIFEST_NAME
    write_manifest(manifest, out)
    logger.info("split sizes train/val/test = %d/%d/%d", *manifest.sizes)
    _stdout().print(f"wrote manifest {out}")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = _config(args)
    root = _require_root(config, "preprocess")
    if not args.manifest:
        raise UsageError("preprocess requires --manifest")
    if not args.out:
        raise UsageError("preprocess requires --out")
    manifest = read_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "preprocess_config.json", config.preprocess.to_dict())
    written = preprocess_manifest(root, manifest, out, config.preprocess, config.workers, splits=args.splits or SPLIT_NAMES)
    for split, paths in written.items():
        _stdout().print(f"{split}: {len(paths)} sample(s) in {out / split}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    root = _require_root(config, "train")
    run_dir = resolve_run_dir(config.run_dir)
    config.run_dir = str(run_dir)
    config.save(run_dir / RUN_CONFIG_NAME)
    logger.info("run directory %s", run_dir)

    if args.manifest:
        manifest = read_manifest(args.manifest)
    else:
        case_ids = discover_cases(root)
        manifest = make_split(case_ids, config.seed, config.split_ratios, created_from=dataset_fingerprint(root, case_ids))
    write_manifest(manifest, run_dir / MANIFEST_NAME)

    if args.samples:
        samples_root = Path(args.samples)
        train_files = read_index(samples_root / "train")
        val_files = read_index(samples_root / "val")
    else:
        written = preprocess_manifest(root, manifest, run_dir / "samples", config.preprocess, config.workers, splits=("train", "val"))
        train_files, val_files = written["train"], written["val"]

    model = build_model(config.model)
    logger.info("model %s with %d parameters", config.model.variant.value, count_parameters(model))
    result = train_loop(model, train_files, val_files, config.train, run_dir, workers=config.workers)
    _stdout().print(f"best epoch {result.best_epoch} (val loss {result.best_val_loss:.5f}) -> {result.best_checkpoint}")
    return 0


def _checkpoint_path(args: argparse.Namespace) -> Path:
    if args.checkpoint:
        return Path(args.checkpoint)
    if args.run_dir:
        return Path(args.run_dir) / "best.ckpt"
    raise UsageError(f"{args.command} requires --checkpoint or --run-dir")


def _run_config_file(args: argparse.Namespace) -> Optional[Path]:
    if args.run_dir and (Path(args.run_dir) / RUN_CONFIG_NAME).is_file():
        return Path(args.run_dir) / RUN_CONFIG_NAME
    return None


def _case_ids(args: argparse.Namespace, root: Path, split: str) -> List[str]:
    if getattr(args, "cases", None):
        return list(args.cases)
    manifest_path = Path(args.manifest) if args.manifest else None
    if manifest_path is None and args.run_dir and (Path(args.run_dir) / MANIFEST_NAME).is_file():
        manifest_path = Path(args.run_dir) / MANIFEST_NAME
    if manifest_path is not None:
        return read_manifest(manifest_path).ids(split)
    return discover_cases(root)


def cmd_evaluate(args: argparse.Namespace) -> int:
    checkpoint = _checkpoint_path(args)
    model, state = load_checkpoint(checkpoint)
    config = _config(args, _run_config_file(args))
    root = _require_root(config, "evaluate")
    preprocess = dataclasses.replace(config.preprocess, slices_per_modality=model.config.slices_per_modality)

    case_ids = _case_ids(args, root, args.split)
    report = evaluate_split(model, case_ids, root, preprocess, threshold=args.threshold, workers=config.workers, split=args.split)
    if "epoch" in state:
        report.extras["checkpoint_epoch"] = state["epoch"]

    if args.report:
        report_path = Path(args.report)
    else:
        report_path = (Path(args.run_dir) if args.run_dir else checkpoint.parent) / f"eval_{args.split}.json"
    report.write(report_path)
    logger.info("wrote report %s", report_path)
    console = _stdout()
    console.print(format_case_table(report))
    console.print(format_report_table([report]))
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    checkpoint = _checkpoint_path(args)
    model, _ = load_checkpoint(checkpoint)
    config = _config(args, _run_config_file(args))
    root = _require_root(config, "predict")
    preprocess = dataclasses.replace(config.preprocess, slices_per_modality=model.config.slices_per_modality)
    if args.out:
        out = Path(args.out)
    elif args.run_dir:
        out = Path(args.run_dir) / "predictions"
    else:
        raise UsageError("predict requires --out or --run-dir")

    for case_id in _case_ids(args, root, args.split):
        write_prediction_nifti(model, load_case(root, case_id), out, preprocess, threshold=args.threshold)
    _stdout().print(f"wrote predictions to {out}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    if not args.run_dir:
        raise UsageError("inspect requires --run-dir")
    from .run_browser import browse_run

    browse_run(args.run_dir)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    reports = [EvalReport.read(path) for path in args.reports]
    _stdout().print(format_report_table(reports, title=args.title))
    return 0


def _common_parser() -> argparse.ArgumentParser:
    common = StrokesegArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with (part of) the run configuration")
    common.add_argument("--seed", type=int, default=None, help="Global random seed")
    common.add_argument("--workers", type=int, default=None, help="Cap on parallel workers")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    common.add_argument("--run-dir", default=None, help="Run directory (default: $STROKESEG_RUN_DIR or runs/<timestamp>)")
    return common


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=["single_encoder", "dual_encoder"], default=None)
    parser.add_argument("--slices", type=int, choices=[1, 3], default=None, help="Slices per modality (sets model and preprocess)")


def build_parser() -> StrokesegArgumentParser:
    """Build the ``strokeseg`` argument parser with all subcommands."""
    parser = StrokesegArgumentParser(prog=PROG, description="Ischemic stroke lesion segmentation on paired DWI/ADC volumes")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("phantom", parents=[common], help="Write a synthetic phantom dataset")
    p.add_argument("--root", help="Output dataset root")
    p.add_argument("--cases", dest="n_cases", type=int, default=None, help="Number of cases (default 20)")
    p.add_argument("--shape", type=parse_shape, default=None, help="H,W,D (default 48,48,16)")
    p.add_argument("--noise", type=float, default=None, help="Gaussian noise sigma (default 2.0)")
    p.add_argument("--lesion-count", type=parse_count_range, default=None, help="MIN,MAX lesions per case")
    p.add_argument("--lesion-radius", type=parse_radius_range, default=None, help="MIN,MAX lesion semi-axis in voxels")
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("split", parents=[common], help="Write a train/val/test split manifest")
    p.add_argument("--root", help="Dataset root")
    p.add_argument("--ratios", type=parse_ratios, default=None, help="train,val,test fractions")
    p.add_argument("--out", help="Manifest path (default: <root>/split.json)")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("preprocess", parents=[common], help="Turn the cases of a manifest into sample files")
    p.add_argument("--root", help="Dataset root")
    p.add_argument("--manifest", help="Split manifest")
    p.add_argument("--out", help="Output directory for <split>/ sample folders")
    p.add_argument("--splits", nargs="+", choices=list(SPLIT_NAMES), default=None)
    _add_model_flags(p)
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="Train a model and keep the best checkpoint")
    p.add_argument("--root", help="Dataset root")
    p.add_argument("--manifest", help="Split manifest (default: split the dataset with --seed)")
    p.add_argument("--samples", help="Preprocessed sample directory (default: preprocess into the run directory)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--freeze-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None, help="Learning rate")
    p.add_argument("--no-augment", action="store_true", help="Disable training augmentation")
    _add_model_flags(p)
    p.set_defaults(handler=cmd_train)

    for name, handler, text in (("evaluate", cmd_evaluate, "Score a checkpoint on one split"), ("predict", cmd_predict, "Write prediction masks as NIfTI")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--root", help="Dataset root (default: from the run configuration)")
        p.add_argument("--checkpoint", help="Checkpoint (default: <run-dir>/best.ckpt)")
        p.add_argument("--manifest", help="Split manifest (default: <run-dir>/split.json)")
        p.add_argument("--split", choices=list(SPLIT_NAMES), default="test")
        p.add_argument("--cases", nargs="+", help="Explicit case IDs instead of a split")
        p.add_argument("--threshold", type=float, default=0.5)
        if name == "evaluate":
            p.add_argument("--report", help="Report path (default: eval_<split>.json in the run directory or next to the checkpoint)")
        else:
            p.add_argument("--out", help="Output directory (default: <run-dir>/predictions)")
        p.set_defaults(handler=handler)

    p = sub.add_parser("inspect", parents=[common], help="Browse the metrics and reports of a run")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("compare", parents=[common], help="Tabulate several evaluation reports")
    p.add_argument("reports", nargs="+", help="eval_*.json files")
    p.add_argument("--title", default=None)
    p.set_defaults(handler=cmd_compare)
    return parser


def _one_line(error: BaseException) -> str:
    lines = str(error).strip().splitlines()
    return lines[0] if lines else type(error).__name__


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code.

    Returns:
        0 on success, 1 on usage errors, 2 on runtime errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level)
        return int(args.handler(args))
    except UsageError as e:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"{PROG}: error: {_one_line(e)}\n")
        return 1
    except KeyboardInterrupt:
        return 130
    except (StrokeSegError, OSError, ValueError, RuntimeError) as e:
        sys.stderr.write(f"{PROG}: error: {_one_line(e)}\n")
        return 2


__all__ = ["main", "build_parser", "resolve_run_dir", "parse_ratios", "parse_shape", "RUN_DIR_ENV"]
