"""Autoregressive Monte-Carlo forecasting and empirical quantile extraction.

Each trajectory owns an independent rng stream. Per decode step the raw
context (original history plus everything generated so far) is
re-normalized causally, the model emits mixture parameters for the next
patch, one patch of values is sampled per variate, denormalized with the
current context-end statistics, and appended.
"""

from __future__ import annotations

import math

import numpy as np

from .. import numkit as nk
from .. import smm
from ..backbone import Model
from ..numkit import Rng
from ..scaler import ScalerConfig, normalize_patches
from .checkpoint import Checkpoint


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    disable_va = bool((ckpt.ablations or {}).get("disable_variate_attention"))
    return Model(ckpt.config, params=ckpt.to_tensors(),
                 disable_variate_attention=disable_va)


def forecast(model: Model, context: np.ndarray, id_mask: np.ndarray | None,
             horizon: int, num_samples: int, rng: Rng,
             scaler_cfg: ScalerConfig | None = None,
             max_horizon: int = 512) -> np.ndarray:
    """Sampled forecast trajectories of shape (num_samples, M, horizon)."""
    context = np.asarray(context, dtype=np.float64)
    if context.ndim != 2 or context.shape[1] < 1:
        raise ValueError("context must be (M, Lc) with Lc >= 1")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if horizon > max_horizon:
        raise ValueError(f"horizon {horizon} exceeds the configured maximum {max_horizon}")
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")

    cfg = model.cfg
    patch = cfg.patch_size
    scaler_cfg = scaler_cfg or ScalerConfig(patch_size=patch)
    if scaler_cfg.patch_size != patch:
        raise ValueError("scaler patch_size must match the model patch_size")

    variates, ctx_len = context.shape
    pad = (-ctx_len) % patch
    padded_len = ctx_len + pad
    raw = np.concatenate([np.zeros((variates, pad)), context], axis=1)
    raw = np.repeat(raw[None, :, :], num_samples, axis=0)
    weights_row = np.concatenate([np.zeros((variates, pad)), np.ones((variates, ctx_len))],
                                 axis=1)

    streams = [rng.child(i) for i in range(num_samples)]
    head = model.head_params()
    decode_steps = math.ceil(horizon / patch)

    with nk.no_grad():
        for _ in range(decode_steps):
            window = raw
            w = np.broadcast_to(weights_row, raw.shape)
            if raw.shape[-1] > cfg.max_context:
                window = raw[..., -cfg.max_context:]
                w = w[..., -cfg.max_context:]
            normalized, stats = normalize_patches(window, np.ascontiguousarray(w), scaler_cfg)
            feats = model.token_features(normalized, id_mask=id_mask)
            last = feats[:, :, -1]  # token T-1 predicts the patch after the window
            params = smm.compute_params(last, head)

            end_mean = stats.means[..., -1]    # (u, M)
            end_scale = stats.scales[..., -1]
            new_patch = np.empty((num_samples, variates, patch))
            for i in range(num_samples):
                slice_params = smm.MixtureParams(
                    pi=params.pi.data[i], mu=params.mu.data[i],
                    tau=params.tau.data[i], nu=params.nu.data[i])
                draw = smm.sample(slice_params, streams[i], 1)[0]  # (M, P) normalized
                new_patch[i] = draw * end_scale[i][:, None] + end_mean[i][:, None]

            raw = np.concatenate([raw, new_patch], axis=-1)
            weights_row = np.concatenate([weights_row, np.ones((variates, patch))], axis=1)

    return raw[:, :, padded_len:padded_len + horizon]


def quantiles(samples: np.ndarray, levels) -> np.ndarray:
    """Per-(variate, step) empirical quantiles with linear interpolation.

    samples is (u, M, H); returns (len(levels), M, H).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[0] < 1:
        raise ValueError("samples must be (u, M, H) with u >= 1")
    levels = list(levels)
    if not levels:
        raise ValueError("quantiles: empty level list")
    if any(not 0.0 < q < 1.0 for q in levels):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    return np.quantile(samples, levels, axis=0, method="linear")
