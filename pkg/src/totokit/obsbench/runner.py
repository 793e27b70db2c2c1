"""End-to-end evaluation: forecasters -> per-task metrics -> aggregates.

Per (series, term) task the raw point and probabilistic errors are
averaged over rolling windows and variates, then normalized by the
seasonal-naive reference. Queries where any window/variate has a zero
naive error (test or in-sample) move wholesale to the low-variability
split, which reports raw MAE and un-normalized CRPS under arithmetic
means. Main-split scores aggregate with the shifted geometric mean.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..data import MultivariateSeries
from ..engine import forecast as engine_forecast
from ..engine import quantiles as engine_quantiles
from ..numkit import Rng
from ..scaler import ScalerConfig
from .aggregate import aggregate_shifted_geomean, impute_invalid, rank_models
from .metrics import DECILES, crps_wql, insample_naive_mae, seasonal_naive
from .protocol import SEASONALITY, rolling_windows, term_horizons, test_split_length


@dataclass
class EvalConfig:
    levels: tuple = DECILES
    num_samples: int = 128
    seed: int = 0
    jobs: int = 1
    seasonality_override: dict[str, int] | None = None

    def seasonality(self, freq: str) -> int:
        table = dict(SEASONALITY)
        if self.seasonality_override:
            table.update(self.seasonality_override)
        return table[freq]


class SeasonalNaiveForecaster:
    """Reference forecaster: repeats the last season; all quantiles collapse
    onto the point forecast."""

    name = "seasonal_naive"

    def __init__(self, levels=DECILES):
        self.levels = tuple(levels)

    def predict(self, context: np.ndarray, horizon: int, m: int, key: str):
        point = seasonal_naive(context, m, horizon)
        return point, {q: point for q in self.levels}


class ModelForecaster:
    """Monte-Carlo forecaster backed by a trained model checkpoint."""

    def __init__(self, model, name: str = "model", num_samples: int = 128,
                 seed: int = 0, levels=DECILES, scaler_cfg: ScalerConfig | None = None,
                 max_horizon: int = 512):
        self.model = model
        self.name = name
        self.num_samples = num_samples
        self.levels = tuple(levels)
        self.scaler_cfg = scaler_cfg or ScalerConfig(patch_size=model.cfg.patch_size)
        self.max_horizon = max_horizon
        self._root = Rng(seed)

    def _rng_for(self, key: str) -> Rng:
        return self._root.child(zlib.crc32(f"{self.name}|{key}".encode()))

    def predict(self, context: np.ndarray, horizon: int, m: int, key: str):
        ctx = context[:, -self.model.cfg.max_context:]
        samples = engine_forecast(self.model, ctx, None, horizon, self.num_samples,
                                  self._rng_for(key), scaler_cfg=self.scaler_cfg,
                                  max_horizon=max(self.max_horizon, horizon))
        qs = engine_quantiles(samples, self.levels)
        point = engine_quantiles(samples, [0.5])[0]
        return point, {q: qs[i] for i, q in enumerate(self.levels)}


@dataclass
class TaskRecord:
    series_id: str
    term: str
    horizon: int
    metrics: dict[str, dict[str, float]]   # model -> {mase, crps, mae} raw task means
    naive_mase: float
    naive_crps: float
    zero_naive: bool                       # any window/variate with a zero naive error
    split: str = "main"
    normalized: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def task_id(self) -> str:
        return f"{self.series_id}:{self.term}"


def _evaluate_series(series: MultivariateSeries, forecasters, cfg: EvalConfig) -> list[TaskRecord]:
    values = series.values
    length = series.length
    test_len = test_split_length(length)
    train_len = length - test_len
    m = cfg.seasonality(series.freq)
    if train_len <= m:
        m = 1  # series too short for the calendar period; fall back to plain naive

    insample = np.array([insample_naive_mae(values[v, :train_len], m)
                         for v in range(series.num_variates)])
    records = []
    for term, horizon in term_horizons(series.freq, length):
        per_model: dict[str, dict[str, list[float]]] = {
            f.name: {"mase": [], "crps": [], "mae": []} for f in forecasters}
        naive_mase_vals: list[float] = []
        naive_crps_vals: list[float] = []
        zero_naive = bool(np.any(insample == 0.0))

        for w_idx, window in enumerate(rolling_windows(length, horizon)):
            context = values[:, :window.context_end]
            actual = values[:, window.target_start:window.target_end]
            key = f"{series.id}|{term}|{w_idx}"

            naive_point = seasonal_naive(context, m, horizon)
            naive_quant = {q: naive_point for q in cfg.levels}
            for v in range(series.num_variates):
                naive_mae = float(np.mean(np.abs(naive_point[v] - actual[v])))
                if naive_mae == 0.0:
                    zero_naive = True
                if insample[v] > 0.0:
                    naive_mase_vals.append(naive_mae / insample[v])
                naive_crps_vals.append(crps_wql({q: naive_quant[q][v] for q in cfg.levels},
                                                actual[v], cfg.levels))

            for fc in forecasters:
                if isinstance(fc, SeasonalNaiveForecaster):
                    point, quant = naive_point, naive_quant
                else:
                    point, quant = fc.predict(context, horizon, m, key)
                stats = per_model[fc.name]
                for v in range(series.num_variates):
                    mae = float(np.mean(np.abs(point[v] - actual[v])))
                    stats["mae"].append(mae)
                    if insample[v] > 0.0:
                        stats["mase"].append(mae / insample[v])
                    stats["crps"].append(crps_wql({q: quant[q][v] for q in cfg.levels},
                                                  actual[v], cfg.levels))

        metrics = {}
        for name, stats in per_model.items():
            metrics[name] = {
                "mase": float(np.mean(stats["mase"])) if stats["mase"] else float("nan"),
                "crps": float(np.mean(stats["crps"])),
                "mae": float(np.mean(stats["mae"])),
            }
        records.append(TaskRecord(
            series_id=series.id, term=term, horizon=horizon, metrics=metrics,
            naive_mase=float(np.mean(naive_mase_vals)) if naive_mase_vals else float("nan"),
            naive_crps=float(np.mean(naive_crps_vals)),
            zero_naive=zero_naive,
        ))
    return records


def normalize_and_split(records: list[TaskRecord]) -> tuple[list[TaskRecord], list[TaskRecord]]:
    """Assign splits (whole query moves together) and fill normalized metrics."""
    flat_series = {r.series_id for r in records if r.zero_naive}
    main, flat = [], []
    for rec in records:
        if rec.series_id in flat_series:
            rec.split = "flat"
            rec.normalized = {name: {"mase": vals["mae"], "crps": vals["crps"]}
                              for name, vals in rec.metrics.items()}
            flat.append(rec)
        else:
            rec.split = "main"
            rec.normalized = {
                name: {"mase": vals["mase"] / rec.naive_mase,
                       "crps": vals["crps"] / rec.naive_crps}
                for name, vals in rec.metrics.items()
            }
            main.append(rec)
    return main, flat


@dataclass
class EvalReport:
    records: list[TaskRecord]
    model_names: list[str]
    aggregates: dict[str, dict[str, float]]
    main_count: int = 0
    flat_count: int = 0


def evaluate(dataset: list[MultivariateSeries], forecasters, cfg: EvalConfig) -> EvalReport:
    if not dataset:
        raise ValueError("evaluate: empty dataset")
    names = [f.name for f in forecasters]
    if len(set(names)) != len(names):
        raise ValueError("forecaster names must be unique")

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(lambda s: _evaluate_series(s, forecasters, cfg), dataset))
    else:
        chunks = [_evaluate_series(s, forecasters, cfg) for s in dataset]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.series_id, r.term))

    main, flat = normalize_and_split(records)
    aggregates: dict[str, dict[str, float]] = {name: {} for name in names}

    for name in names:
        agg = aggregates[name]
        if main:
            mase_vals = impute_invalid([r.normalized[name]["mase"] for r in main])
            crps_vals = impute_invalid([r.normalized[name]["crps"] for r in main])
            agg["mase"] = aggregate_shifted_geomean(mase_vals)
            agg["crps"] = aggregate_shifted_geomean(crps_vals)
        if flat:
            flat_mae = impute_invalid([r.normalized[name]["mase"] for r in flat])
            flat_crps = impute_invalid([r.normalized[name]["crps"] for r in flat])
            agg["flat_mae"] = float(np.mean(flat_mae))
            agg["flat_crps"] = float(np.mean(flat_crps))

    rank_pool = main if main else flat
    if rank_pool and names:
        matrix = np.stack([
            impute_invalid([r.normalized[name]["crps"] for r in rank_pool])
            for name in names
        ])
        ranks = rank_models(matrix)
        for name, rank in zip(names, ranks):
            aggregates[name]["rank"] = float(rank)

    return EvalReport(records=records, model_names=names, aggregates=aggregates,
                      main_count=len(main), flat_count=len(flat))
