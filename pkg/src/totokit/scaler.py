"""Patch-based causal instance normalization.

Per-timestep running mean/scale are computed with a vectorized online
(Welford) update in O(L) per variate. Timesteps inside a patch share the
statistics of that patch's final timestep; scales are clipped against a
per-variate reference scale before use. Everything here operates on raw
numpy arrays (normalization happens outside the gradient graph).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ScalerConfig:
    minimum_scale: float = 0.1
    kappa: float = 10.0
    patch_size: int = 8
    # the clip reference is a standard deviation by default; the variance
    # reading is kept switchable because the bound is stated ambiguously
    clip_with_variance: bool = False

    def __post_init__(self):
        if self.minimum_scale <= 0:
            raise ValueError("minimum_scale must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.patch_size < 1:
            raise ValueError("patch_size must be at least 1")


@dataclass
class CausalStats:
    """Per-timestep means/scales plus the per-variate clip reference."""

    means: np.ndarray        # M x L
    scales: np.ndarray       # M x L, clipped
    variate_scale: np.ndarray  # M


def _validate_weights(data: np.ndarray, weights: np.ndarray) -> None:
    if data.shape != weights.shape:
        raise ValueError(f"data shape {data.shape} != weights shape {weights.shape}")
    if data.size == 0:
        raise ValueError("empty series")
    if not np.all((weights == 0) | (weights == 1)):
        raise ValueError("weights must be binary (0/1)")


def compute_causal_statistics(
    data: np.ndarray, weights: np.ndarray, minimum_scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Running weighted mean and sqrt(Bessel variance + minimum_scale) per timestep.

    Single cumulative pass; denominators clamp to 1 so fully-masked
    prefixes yield mean 0 and scale sqrt(minimum_scale).
    """
    data = np.asarray(data, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _validate_weights(data, weights)
    if minimum_scale <= 0:
        raise ValueError("minimum_scale must be positive")

    weighted_data = weights * data
    cum_weights = np.cumsum(weights, axis=-1)
    cum_values = np.cumsum(weighted_data, axis=-1)
    denominator = np.maximum(cum_weights, 1.0)
    causal_means = cum_values / denominator

    # online second-moment update: delta uses the previous running mean
    shifted_means = np.zeros_like(causal_means)
    shifted_means[..., 1:] = causal_means[..., :-1]
    delta = data - shifted_means
    increment = delta * (data - causal_means) * weights
    m2 = np.cumsum(increment, axis=-1)

    causal_variance = m2 / np.maximum(denominator - 1.0, 1.0)
    causal_scale = np.sqrt(causal_variance + minimum_scale)
    return causal_means, causal_scale


def clip_scales(scales: np.ndarray, variate_scale: np.ndarray, kappa: float) -> np.ndarray:
    """Clamp each scale into [max(0.1, s*10^-kappa), s*10^kappa] per variate.

    kappa=inf disables clipping. A zero reference scale carries no range
    information, so it imposes no upper bound (an s=0 upper bound would
    make the interval empty and force division by zero downstream).
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if np.isinf(kappa):
        return np.asarray(scales, dtype=np.float64)
    s = np.asarray(variate_scale, dtype=np.float64)
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValueError("variate_scale must be finite and non-negative")
    lower = np.maximum(0.1, s * 10.0 ** (-kappa))[..., None]
    upper = np.where(s > 0.0, s * 10.0 ** kappa, np.inf)[..., None]
    return np.clip(scales, lower, np.maximum(upper, lower))


def weighted_variate_scale(
    data: np.ndarray, weights: np.ndarray, cfg: ScalerConfig
) -> np.ndarray:
    """Per-variate full-series weighted spread used as the clip reference."""
    data = np.asarray(data, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    total = np.maximum(weights.sum(axis=-1), 1.0)
    mean = (weights * data).sum(axis=-1) / total
    sq = (weights * (data - mean[..., None]) ** 2).sum(axis=-1)
    var = sq / np.maximum(total - 1.0, 1.0)
    return var if cfg.clip_with_variance else np.sqrt(var)


def normalize_patches(
    data: np.ndarray,
    weights: np.ndarray,
    cfg: ScalerConfig,
    variate_scale: np.ndarray | None = None,
) -> tuple[np.ndarray, CausalStats]:
    """Normalize each patch by the clipped stats at that patch's final timestep.

    variate_scale defaults to the full-series weighted spread (training
    behavior); pass a context-only value for inference.
    """
    data = np.asarray(data, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _validate_weights(data, weights)
    length = data.shape[-1]
    patch = cfg.patch_size
    if length % patch != 0:
        raise ValueError(f"series length {length} is not divisible by patch size {patch}")

    means, scales = compute_causal_statistics(data, weights, cfg.minimum_scale)
    if variate_scale is None:
        variate_scale = weighted_variate_scale(data, weights, cfg)
    scales = clip_scales(scales, variate_scale, cfg.kappa)

    final_idx = np.arange(patch - 1, length, patch)
    patch_means = np.repeat(means[..., final_idx], patch, axis=-1)
    patch_scales = np.repeat(scales[..., final_idx], patch, axis=-1)
    normalized = (data - patch_means) / patch_scales

    stats = CausalStats(means=means, scales=scales, variate_scale=np.asarray(variate_scale))
    return normalized, stats


def context_end_stats(stats: CausalStats) -> tuple[np.ndarray, np.ndarray]:
    """(mean, scale) at the final context timestep, per variate."""
    return stats.means[..., -1], stats.scales[..., -1]


def denormalize(values: np.ndarray, end_stats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Invert normalization with the context-end statistics: x*scale + mean."""
    mean, scale = end_stats
    mean = np.asarray(mean, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[:-1] != mean.shape:
        raise ValueError(f"values shape {values.shape} incompatible with stats shape {mean.shape}")
    return values * scale[..., None] + mean[..., None]
