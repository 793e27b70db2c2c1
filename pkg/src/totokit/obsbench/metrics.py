"""Forecast accuracy metrics: seasonal naive, MASE, quantile-loss CRPS."""

from __future__ import annotations

import numpy as np

DECILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class LowVariability(Exception):
    """The seasonal-naive denominator is zero; the series belongs in the flat split."""


def seasonal_naive(history: np.ndarray, m: int, horizon: int) -> np.ndarray:
    """Repeat the final season of the history across the horizon."""
    history = np.asarray(history, dtype=np.float64)
    if history.shape[-1] < m:
        raise ValueError(f"history length {history.shape[-1]} is shorter than the "
                         f"seasonal period {m}")
    last_season = history[..., -m:]
    idx = np.arange(horizon) % m
    return last_season[..., idx]


def insample_naive_mae(train: np.ndarray, m: int) -> float:
    """Mean |Y_t - Y_(t-m)| over the training split."""
    train = np.asarray(train, dtype=np.float64)
    if train.shape[-1] <= m:
        raise ValueError(f"training split length {train.shape[-1]} must exceed m={m}")
    return float(np.mean(np.abs(train[..., m:] - train[..., :-m])))


def mase(forecast: np.ndarray, actual: np.ndarray, train_history: np.ndarray,
         m: int) -> float:
    """Forecast MAE scaled by the in-sample seasonal-naive MAE.

    Raises LowVariability when the in-sample denominator is zero.
    """
    forecast = np.asarray(forecast, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    denom = insample_naive_mae(train_history, m)
    if denom == 0.0:
        raise LowVariability("in-sample seasonal-naive MAE is zero")
    return float(np.mean(np.abs(forecast - actual))) / denom


def crps_wql(quantile_forecasts: dict[float, np.ndarray], actual: np.ndarray,
             levels=DECILES) -> float:
    """Mean weighted quantile loss over the level set.

    Per level q: 2 * sum(q*(y - yhat)+ + (1-q)*(yhat - y)+) / sum|y|.
    A zero |y| mass yields a non-finite value, flagged for imputation
    downstream rather than raised.
    """
    levels = sorted(levels)
    if not levels or levels[0] <= 0.0 or levels[-1] >= 1.0:
        raise ValueError("levels must lie strictly inside (0, 1)")
    actual = np.asarray(actual, dtype=np.float64)
    abs_mass = float(np.sum(np.abs(actual)))

    total = 0.0
    for q in levels:
        if q not in quantile_forecasts:
            raise ValueError(f"missing forecast for quantile level {q}")
        pred = np.asarray(quantile_forecasts[q], dtype=np.float64)
        if pred.shape != actual.shape:
            raise ValueError(f"level {q}: forecast shape {pred.shape} != actual {actual.shape}")
        diff = actual - pred
        pinball = q * np.maximum(diff, 0.0) + (1.0 - q) * np.maximum(-diff, 0.0)
        total += 2.0 * float(pinball.sum())
    mean_pinball = total / len(levels)
    if abs_mass == 0.0:
        return float("inf") if mean_pinball > 0.0 else float("nan")
    return mean_pinball / abs_mass
