"""MASE/CRPS evaluation harness with the seasonal-naive reference protocol."""

from .aggregate import aggregate_shifted_geomean, impute_invalid, rank_models
from .metrics import DECILES, LowVariability, crps_wql, insample_naive_mae, mase, seasonal_naive
from .protocol import (
    SEASONALITY,
    SHORT_HORIZON,
    EvalTask,
    Window,
    rolling_windows,
    term_horizons,
    test_split_length,
)
from .report import write_metrics_csv, write_summary_json
from .runner import (
    EvalConfig,
    EvalReport,
    ModelForecaster,
    SeasonalNaiveForecaster,
    TaskRecord,
    evaluate,
    normalize_and_split,
)

__all__ = [
    "DECILES",
    "EvalConfig",
    "EvalReport",
    "EvalTask",
    "LowVariability",
    "ModelForecaster",
    "SEASONALITY",
    "SHORT_HORIZON",
    "SeasonalNaiveForecaster",
    "TaskRecord",
    "Window",
    "aggregate_shifted_geomean",
    "crps_wql",
    "evaluate",
    "impute_invalid",
    "insample_naive_mae",
    "mase",
    "normalize_and_split",
    "rank_models",
    "rolling_windows",
    "seasonal_naive",
    "term_horizons",
    "test_split_length",
    "write_metrics_csv",
    "write_summary_json",
]
