#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created Textual run browser for a training run directory
# - Shows the per-epoch metric log and the per-case Dice of the latest evaluation report
# - Added sorting options for the case table: Case ID or Dice
# - Added ascending/descending toggle
# - Use Textual reactive attributes for sort mode and order
# - Add watchers to automatically refresh when sort settings change
# - Run loading lives in plain functions so it can be used without a terminal
#

"""Terminal browser for a run directory (metric log + evaluation reports)."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

from textual.app import App, ComposeResult
from textual.binding import Binding
from textual.containers import Vertical
from textual.reactive import reactive
from textual.widgets import DataTable, Footer, Header, Label

from .evaluate import CaseResult, EvalReport
from .train import METRIC_LOG_NAME, EpochMetrics, read_metric_log

PathLike = Union[str, Path]

REPORT_GLOB = "eval_*.json"


class SortMode(Enum):
    """Available sorting modes for the case table."""

    CASE = "case"
    DICE = "dice"


class SortOrder(Enum):
    """Sort order options."""

    ASCENDING = "asc"
    DESCENDING = "desc"


@dataclass
class RunSummary:
    """What the browser shows about one run directory."""

    run_dir: Path
    history: List[EpochMetrics] = field(default_factory=list)
    reports: List[EvalReport] = field(default_factory=list)

    @property
    def best_epoch(self) -> Optional[EpochMetrics]:
        if not self.history:
            return None
        return min(self.history, key=lambda row: row.val_loss)

    @property
    def latest_report(self) -> Optional[EvalReport]:
        return self.reports[-1] if self.reports else None


def load_run_summary(run_dir: PathLike) -> RunSummary:
    """Read the metric log and every ``eval_*.json`` report of a run.

    Raises:
        FileNotFoundError: If the run directory does not exist
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    summary = RunSummary(run_dir=run_dir)
    if (run_dir / METRIC_LOG_NAME).is_file():
        summary.history = read_metric_log(run_dir / METRIC_LOG_NAME)
    summary.reports = [EvalReport.read(path) for path in sorted(run_dir.glob(REPORT_GLOB))]
    return summary


def sort_cases(cases: Sequence[CaseResult], mode: SortMode, order: SortOrder) -> List[CaseResult]:
    """Return the case results ordered for display."""
    reverse = order == SortOrder.DESCENDING
    if mode == SortMode.DICE:
        return sorted(cases, key=lambda r: (r.dice, r.case_id), reverse=reverse)
    return sorted(cases, key=lambda r: r.case_id, reverse=reverse)


class RunBrowserApp(App[None]):
    """A Textual app showing the metric log and per-case Dice of a run."""

    CSS = """
    #main-container {
        width: 100%;
        height: 100%;
        layout: vertical;
        padding-top: 1;
    }

    #summary {
        background: $surface;
        color: yellow;
        padding: 0 1;
        height: 1;
        width: 100%;
    }

    DataTable {
        height: 1fr;
        border: solid $primary;
    }
    """

    BINDINGS = [
        Binding("q", "quit", "Quit", priority=True),
        Binding("escape", "quit", "Quit"),
        Binding("s", "toggle_sort_order", "Asc/Desc", show=True),
        Binding("m", "toggle_sort_mode", "Sort by", show=True),
    ]

    sort_mode = reactive(SortMode.CASE)
    sort_order = reactive(SortOrder.ASCENDING)

    def __init__(self, summary: RunSummary) -> None:
        super().__init__()
        self.summary = summary
        self.title = "strokeseg run browser"
        self.sub_title = str(summary.run_dir)

    def compose(self) -> ComposeResult:
        yield Header()
        with Vertical(id="main-container"):
            yield Label(self.summary_text(), id="summary")
            yield DataTable(id="metrics-table", zebra_stripes=True)
            yield DataTable(id="cases-table", zebra_stripes=True)
        yield Footer()

    def on_mount(self) -> None:
        metrics = self.query_one("#metrics-table", DataTable)
        metrics.add_columns("Epoch", "Stage", "Train loss", "Val loss", "Val Dice")
        for row in self.summary.history:
            metrics.add_row(str(row.epoch), row.stage, f"{row.train_loss:.5f}", f"{row.val_loss:.5f}", f"{row.val_dice:.4f}")

        cases = self.query_one("#cases-table", DataTable)
        cases.add_columns("Case", "Dice", "GT voxels", "Pred voxels")
        self._fill_cases()
        metrics.focus()

    def summary_text(self) -> str:
        parts = []
        best = self.summary.best_epoch
        if best is not None:
            parts.append(f"best epoch {best.epoch} (val loss {best.val_loss:.5f})")
        report = self.summary.latest_report
        if report is not None:
            parts.append(f"{report.model_label}: mean Dice {100.0 * report.mean_dice:.1f}% on {report.split}")
        return " | ".join(parts) or "no metrics or reports in this run yet"

    def displayed_cases(self) -> List[CaseResult]:
        report = self.summary.latest_report
        if report is None:
            return []
        return sort_cases(report.per_case, self.sort_mode, self.sort_order)

    def _fill_cases(self) -> None:
        table = self.query_one("#cases-table", DataTable)
        table.clear()
        for r in self.displayed_cases():
            table.add_row(r.case_id, f"{r.dice:.4f}", str(r.lesion_voxels_gt), str(r.lesion_voxels_pred))

    def watch_sort_mode(self, old_mode: SortMode, new_mode: SortMode) -> None:
        if self.is_mounted:
            self._fill_cases()

    def watch_sort_order(self, old_order: SortOrder, new_order: SortOrder) -> None:
        if self.is_mounted:
            self._fill_cases()

    def action_toggle_sort_order(self) -> None:
        self.sort_order = SortOrder.DESCENDING if self.sort_order == SortOrder.ASCENDING else SortOrder.ASCENDING

    def action_toggle_sort_mode(self) -> None:
        self.sort_mode = SortMode.DICE if self.sort_mode == SortMode.CASE else SortMode.CASE

    async def action_quit(self) -> None:
        self.exit(None)


def browse_run(run_dir: PathLike) -> None:
    """Open the run browser on ``run_dir`` and block until the user quits."""
    RunBrowserApp(load_run_summary(run_dir)).run()


__all__ = ["RunBrowserApp", "RunSummary", "SortMode", "SortOrder", "load_run_summary", "sort_cases", "browse_run"]
