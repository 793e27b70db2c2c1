"""Dataset file format: newline-delimited JSON, one series per line.

Fields per record: id (string), freq (code), values (M arrays of L
numbers), optional weights (same shape, default all-1), optional
metric_type and start. Floats serialize at full round-trip precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .series import MultivariateSeries


class DatasetFormatError(ValueError):
    pass


def save_dataset(series: list[MultivariateSeries], path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for s in series:
            record = {"id": s.id, "freq": s.freq, "values": s.values.tolist()}
            if not np.all(s.weights == 1):
                record["weights"] = s.weights.tolist()
            if s.metric_type is not None:
                record["metric_type"] = s.metric_type
            if s.start is not None:
                record["start"] = s.start
            fh.write(json.dumps(record) + "\n")


def _impute(values: np.ndarray, metric_type: str | None) -> np.ndarray:
    """Fill NaNs: counts assume inactivity (zero); everything else interpolates."""
    if not np.any(np.isnan(values)):
        return values
    out = values.copy()
    if metric_type == "count":
        out[np.isnan(out)] = 0.0
        return out
    for row in out:
        bad = np.isnan(row)
        if bad.all():
            row[:] = 0.0
            continue
        idx = np.arange(row.size)
        row[bad] = np.interp(idx[bad], idx[~bad], row[~bad])
    return out


def load_dataset(path, impute_missing: bool = False) -> list[MultivariateSeries]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            for required in ("id", "freq", "values"):
                if required not in record:
                    raise DatasetFormatError(f"{path}:{lineno}: missing field {required!r}")
            rows = record["values"]
            if not rows or any(len(r) != len(rows[0]) for r in rows):
                raise DatasetFormatError(f"{path}:{lineno}: ragged or empty variate rows")
            values = np.asarray(rows, dtype=np.float64)
            metric_type = record.get("metric_type")
            if impute_missing:
                values = _impute(values, metric_type)
            try:
                out.append(MultivariateSeries(
                    id=record["id"],
                    freq=record["freq"],
                    values=values,
                    weights=record.get("weights"),
                    start=record.get("start"),
                    metric_type=metric_type,
                ))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return out
