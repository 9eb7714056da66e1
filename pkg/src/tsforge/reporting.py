"""Run reports: delimited tables plus rendered figures.

write_report produces, in one directory:

* report.json - metrics, per-item category sequences, and every record;
* report.csv  - one row per (item, trial): item_id, tag, trial,
  category, latency_ms;
* accuracy_by_tag.png - bar chart of per-tag accuracy;
* outcome_grid.png    - item x trial category grid.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import Metrics, RunRecord, compute_metrics
from .qa.suite import QAItem

_CATEGORY_LEVEL = {"runtime_error": 0, "incorrect": 1, "correct": 2}
_CATEGORY_COLORS = ("#b2182b", "#fddbc7", "#1a9850")


def _metrics_json(metrics: Metrics) -> dict:
    return {
        "accuracy": metrics.accuracy,
        "pass_at_k": metrics.pass_at_k,
        "k": metrics.k,
        "self_consistency": metrics.self_consistency,
        "breakdowns": {tag: dict(vals)
                       for tag, vals in metrics.breakdowns.items()},
    }


def write_report_csv(records: Sequence[RunRecord], suite: Sequence[QAItem],
                     path) -> None:
    tag_of = {item.item_id: item.primary_tag() for item in suite}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "tag", "trial", "category", "latency_ms"])
        for rec in records:
            writer.writerow([rec.item_id, tag_of.get(rec.item_id, ""),
                             rec.trial_index, rec.category,
                             f"{rec.latency_ms:.3f}"])


def _plot_accuracy_by_tag(metrics: Metrics, path) -> None:
    tags = sorted(metrics.breakdowns)
    values = [metrics.breakdowns[t]["accuracy"] for t in tags]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * max(1, len(tags))), 3.2))
    if tags:
        ax.bar(range(len(tags)), values, color="#4878d0")
        ax.set_xticks(range(len(tags)))
        ax.set_xticklabels(tags)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("accuracy")
    ax.set_title("Accuracy by tag")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_outcome_grid(records: Sequence[RunRecord],
                       suite: Sequence[QAItem], path) -> None:
    item_ids = [item.item_id for item in suite]
    order = {item_id: i for i, item_id in enumerate(item_ids)}
    n_trials = 1 + max((r.trial_index for r in records), default=0)
    grid = np.full((max(1, len(item_ids)), n_trials), np.nan)
    for rec in records:
        if rec.item_id in order:
            grid[order[rec.item_id], rec.trial_index] = \
                _CATEGORY_LEVEL[rec.category]
    fig_h = max(2.5, 0.22 * len(item_ids) + 1.2)
    fig, ax = plt.subplots(figsize=(1.2 * n_trials + 3.0, fig_h))
    cmap = matplotlib.colors.ListedColormap(_CATEGORY_COLORS)
    ax.imshow(grid, aspect="auto", cmap=cmap, vmin=0, vmax=2,
              interpolation="nearest")
    ax.set_xticks(range(n_trials))
    ax.set_xlabel("trial")
    ax.set_yticks(range(len(item_ids)))
    ax.set_yticklabels(item_ids, fontsize=6)
    ax.set_title("Outcome per item and trial")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_report(records: Sequence[RunRecord], suite: Sequence[QAItem],
                 out_dir, k: int = 2) -> dict:
    """Write all report artifacts; returns the report document."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = compute_metrics(records, suite, k=k)
    per_item: dict[str, dict] = {}
    for item in suite:
        trials = sorted((r for r in records if r.item_id == item.item_id),
                        key=lambda r: r.trial_index)
        per_item[item.item_id] = {
            "tag": item.primary_tag(),
            "categories": [r.category for r in trials],
        }
    doc = {
        "metrics": _metrics_json(metrics),
        "per_item": per_item,
        "records": [{"item_id": r.item_id, "trial": r.trial_index,
                     "category": r.category, "latency_ms": r.latency_ms,
                     "raw_response": r.raw_response}
                    for r in records],
    }
    (out / "report.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_report_csv(records, suite, out / "report.csv")
    _plot_accuracy_by_tag(metrics, out / "accuracy_by_tag.png")
    _plot_outcome_grid(records, suite, out / "outcome_grid.png")
    return doc
