"""Procedural series generation: trends, ARMA noise, seasonal cycles.

Each variate sums independently parameterized enabled components, then is
clipped at a two-sided quantile and affinely rescaled into a target range.
Generation is a pure function of the config (including its seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numkit import Rng
from .series import MultivariateSeries


@dataclass
class SynthConfig:
    num_series: int = 8
    num_variates: int = 3
    length: int = 1024
    piecewise_linear_trend: bool = True
    arma: bool = True
    sinusoidal_seasonality: bool = True
    residual_dist: str = "gaussian"      # gaussian | student_t | lognormal
    clip_quantile: float = 0.005         # two-sided tail fraction, 0 disables
    rescale_range: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    freq: str = "H"
    season_period_range: tuple[int, int] = (8, 96)
    trend_slope_scale: float = 0.02
    noise_scale: float = 0.3

    def __post_init__(self):
        if self.length < 8:
            raise ValueError("length must be at least 8")
        lo, hi = self.rescale_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("rescale_range must be finite with min < max")
        if self.residual_dist not in ("gaussian", "student_t", "lognormal"):
            raise ValueError(f"unknown residual_dist {self.residual_dist!r}")
        if not (0.0 <= self.clip_quantile < 0.5):
            raise ValueError("clip_quantile must lie in [0, 0.5)")

    def enabled_components(self) -> list[str]:
        out = []
        if self.piecewise_linear_trend:
            out.append("trend")
        if self.arma:
            out.append("arma")
        if self.sinusoidal_seasonality:
            out.append("season")
        return out


def _piecewise_trend(rng: Rng, length: int, slope_scale: float) -> np.ndarray:
    num_segments = int(rng.integers(1, 5))
    breaks = np.sort(rng.choice(length - 1, size=num_segments - 1, replace=False) + 1) \
        if num_segments > 1 else np.array([], dtype=int)
    slopes = rng.normal(num_segments) * slope_scale
    per_step = np.empty(length)
    bounds = np.concatenate([[0], breaks, [length]])
    for seg, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        per_step[a:b] = slopes[seg]
    level = rng.normal() * 2.0
    return level + np.cumsum(per_step)


def _stationary_ar_coeffs(rng: Rng, order: int) -> np.ndarray:
    # rejection-sample until every root of 1 - a1 z - ... - ap z^p lies
    # outside the unit circle
    while True:
        coeffs = rng.uniform(-0.9, 0.9, order)
        poly = np.concatenate([[1.0], -coeffs])
        roots = np.roots(poly[::-1])
        if roots.size == 0 or np.all(np.abs(roots) > 1.0):
            return coeffs


def _innovations(rng: Rng, length: int, dist: str, scale: float) -> np.ndarray:
    if dist == "gaussian":
        return rng.normal(length) * scale
    if dist == "student_t":
        df = 3.0 + rng.uniform(0.0, 5.0)
        z = rng.normal(length)
        chi = rng.chisquare(np.full(length, df))
        return z / np.sqrt(chi / df) * scale
    # lognormal, centered
    draws = np.exp(rng.normal(length) * 0.5)
    return (draws - np.exp(0.125)) * scale


def _arma(rng: Rng, length: int, dist: str, scale: float) -> np.ndarray:
    p = int(rng.integers(0, 3))
    q = int(rng.integers(0, 3))
    ar = _stationary_ar_coeffs(rng, p) if p else np.array([])
    ma = rng.uniform(-0.8, 0.8, q) if q else np.array([])
    eps = _innovations(rng, length + 32, dist, scale)
    x = np.zeros(length + 32)
    for t in range(length + 32):
        acc = eps[t]
        for i, a in enumerate(ar):
            if t - 1 - i >= 0:
                acc += a * x[t - 1 - i]
        for j, b in enumerate(ma):
            if t - 1 - j >= 0:
                acc += b * eps[t - 1 - j]
        x[t] = acc
    return x[32:]  # discard burn-in


def _seasonal(rng: Rng, length: int, period_range: tuple[int, int]) -> np.ndarray:
    lo, hi = period_range
    period = int(rng.integers(lo, hi + 1))
    amplitude = rng.uniform(0.5, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(length)
    return amplitude * np.sin(2.0 * np.pi * t / period + phase)


def _clip_and_rescale(x: np.ndarray, clip_q: float, lo: float, hi: float) -> np.ndarray:
    if clip_q > 0.0:
        low, high = np.quantile(x, [clip_q, 1.0 - clip_q])
        x = np.clip(x, low, high)
    xmin, xmax = x.min(), x.max()
    if xmax > xmin:
        unit = (x - xmin) / (xmax - xmin)
    else:
        unit = np.full_like(x, 0.5)
    return lo + (hi - lo) * unit


def generate_synthetic(cfg: SynthConfig) -> list[MultivariateSeries]:
    """Deterministic synthetic dataset; one Rng stream drives everything."""
    components = cfg.enabled_components()
    if not components:
        raise ValueError("no synthetic components enabled")
    rng = Rng(cfg.seed)
    lo, hi = cfg.rescale_range

    out = []
    for s in range(cfg.num_series):
        rows = []
        for _ in range(cfg.num_variates):
            x = np.zeros(cfg.length)
            if "trend" in components:
                x = x + _piecewise_trend(rng, cfg.length, cfg.trend_slope_scale)
            if "arma" in components:
                x = x + _arma(rng, cfg.length, cfg.residual_dist, cfg.noise_scale)
            if "season" in components:
                x = x + _seasonal(rng, cfg.length, cfg.season_period_range)
            rows.append(_clip_and_rescale(x, cfg.clip_quantile, lo, hi))
        out.append(MultivariateSeries(
            id=f"synth-{cfg.seed}-{s:04d}",
            freq=cfg.freq,
            values=np.stack(rows),
        ))
    return out
