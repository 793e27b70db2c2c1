"""The bundled demo dataset: seeded sinusoid-plus-trend series.

Periods 13..19 keep every cycle out of phase with the hourly
seasonal-naive period (24 mod p stays far from 0), so the naive
reference is genuinely beatable by a model that learns the cycle. Used
by the smoke-test flows and the acceptance suite.
"""

from __future__ import annotations

from .synthetic import SynthConfig


def demo_config(seed: int = 2024) -> SynthConfig:
    return SynthConfig(
        num_series=8,
        num_variates=2,
        length=1024,
        piecewise_linear_trend=True,
        arma=True,
        sinusoidal_seasonality=True,
        residual_dist="gaussian",
        clip_quantile=0.001,
        rescale_range=(0.0, 10.0),
        seed=seed,
        freq="H",
        season_period_range=(13, 19),
        trend_slope_scale=0.004,
        noise_scale=0.05,
    )
