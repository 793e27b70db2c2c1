"""Evaluation protocol: horizon tiers and rolling test windows.

Each series gets a short horizon from its sampling frequency; medium and
long tiers scale it by 10 and 15 and run only when they fit inside the
test split (the final 10% of the series). Windows tile the test split
without overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

# default short-term prediction length per frequency code
SHORT_HORIZON = {"M": 12, "W": 8, "D": 30, "H": 48, "T": 48, "S": 60}

# seasonal period lookup for the naive reference, overridable per run
SEASONALITY = {"S": 60, "T": 1440, "H": 24, "D": 7, "W": 1, "M": 12}

TERM_FACTORS = (("medium", 10), ("long", 15))


def test_split_length(series_len: int) -> int:
    return series_len // 10


def term_horizons(freq: str, series_len: int) -> list[tuple[str, int]]:
    """(term, horizon) pairs for a series: short always, 10x/15x when they fit."""
    if freq not in SHORT_HORIZON:
        raise ValueError(f"unknown frequency code {freq!r}")
    short = SHORT_HORIZON[freq]
    test_len = test_split_length(series_len)
    out = [("short", short)]
    for term, factor in TERM_FACTORS:
        horizon = short * factor
        if horizon <= test_len:
            out.append((term, horizon))
    return out


@dataclass
class Window:
    context_end: int          # exclusive end of available history
    target_start: int
    target_end: int           # exclusive


def rolling_windows(series_len: int, horizon: int) -> list[Window]:
    """Non-overlapping horizon-length target windows tiling the test split."""
    test_len = test_split_length(series_len)
    if horizon > test_len:
        raise ValueError(f"horizon {horizon} exceeds the test split ({test_len} steps)")
    start = series_len - test_len
    count = test_len // horizon
    return [
        Window(context_end=start + i * horizon,
               target_start=start + i * horizon,
               target_end=start + (i + 1) * horizon)
        for i in range(count)
    ]


@dataclass
class EvalTask:
    series_id: str
    term: str
    horizon: int
    windows: list[Window]
    seasonality: int

    @property
    def task_id(self) -> str:
        return f"{self.series_id}:{self.term}"
