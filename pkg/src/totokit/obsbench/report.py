"""Machine-readable evaluation outputs: per-task CSV and a JSON summary."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .runner import EvalReport


def write_metrics_csv(report: EvalReport, path) -> None:
    """One row per (model, task). Main-split rows carry normalized MASE/CRPS;
    flat-split rows carry raw MAE (in the mase column) and raw CRPS."""
    path = Path(path)
    multi = len(report.model_names) > 1
    header = ["task_id", "term", "split", "mase", "crps", "naive_mase", "naive_crps"]
    if multi:
        header = ["model"] + header
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in report.records:
            for name in report.model_names:
                row = [rec.task_id, rec.term, rec.split,
                       repr(rec.normalized[name]["mase"]),
                       repr(rec.normalized[name]["crps"]),
                       repr(rec.naive_mase), repr(rec.naive_crps)]
                if multi:
                    row = [name] + row
                writer.writerow(row)


def write_summary_json(report: EvalReport, path) -> None:
    payload = {
        "models": report.aggregates,
        "num_tasks": len(report.records),
        "main_split_tasks": report.main_count,
        "flat_split_tasks": report.flat_count,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
