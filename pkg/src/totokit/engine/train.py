"""Next-patch-prediction training loop.

Every step samples series, packs them into variate-limited batch items,
normalizes causally (or globally under that ablation), and scores all
next-patch targets in parallel under the causal mask. Padded positions
and the first patch (which has no preceding context) carry zero loss
weight. The loop is fully deterministic given the config seed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .. import numkit as nk
from .. import smm
from ..backbone import Model, ModelConfig
from ..data import MultivariateSeries, ShuffleConfig, preprocess_batch
from ..numkit import Rng, Tensor
from ..scaler import ScalerConfig, normalize_patches
from .checkpoint import Checkpoint
from .optim import AdamState, TrainConfig, adamw_step, clip_global_norm, wsd_lr


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the last good checkpoint."""

    def __init__(self, step: int, checkpoint: Checkpoint, loss_log: list):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.checkpoint = checkpoint
        self.loss_log = loss_log


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_log: list[tuple[int, float, float]] = field(default_factory=list)


def apply_ablations(model_cfg: ModelConfig, loss_cfg: smm.LossConfig,
                    train_cfg: TrainConfig) -> tuple[ModelConfig, smm.LossConfig]:
    if train_cfg.single_student_t:
        model_cfg = dataclasses.replace(model_cfg, k_components=1)
    if train_cfg.disable_robust_loss:
        loss_cfg = dataclasses.replace(loss_cfg, lambda_nll=1.0)
    return model_cfg, loss_cfg


def global_normalize(values: np.ndarray, weights: np.ndarray,
                     scaler_cfg: ScalerConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Whole-series per-variate standardization (the no-causal-scaling arm).

    Returns (normalized, mean, scale); the scale carries the same variance
    floor as the causal path.
    """
    total = np.maximum(weights.sum(axis=-1), 1.0)
    mean = (weights * values).sum(axis=-1) / total
    var = (weights * (values - mean[..., None]) ** 2).sum(axis=-1) / np.maximum(total - 1.0, 1.0)
    scale = np.sqrt(var + scaler_cfg.minimum_scale)
    normalized = (values - mean[..., None]) / scale[..., None]
    return normalized, mean, scale


def _normalize_for_training(values, weights, scaler_cfg: ScalerConfig,
                            use_global: bool) -> tuple[np.ndarray, np.ndarray]:
    """Returns (normalized values, per-position scale used) for one batch item."""
    patch = scaler_cfg.patch_size
    if use_global:
        normalized, _, scale = global_normalize(values, weights, scaler_cfg)
        pos_scale = np.repeat(scale[..., None], values.shape[-1], axis=-1)
        return normalized, pos_scale
    normalized, stats = normalize_patches(values, weights, scaler_cfg)
    length = values.shape[-1]
    final_idx = np.arange(patch - 1, length, patch)
    pos_scale = np.repeat(stats.scales[..., final_idx], patch, axis=-1)
    return normalized, pos_scale


def _batch_loss(model: Model, batch_values, batch_weights, id_mask,
                scaler_cfg: ScalerConfig, loss_cfg: smm.LossConfig,
                use_global: bool) -> tuple[Tensor | None, float]:
    patch = model.cfg.patch_size
    if batch_values.shape[-1] > model.cfg.max_context:
        batch_values = batch_values[:, -model.cfg.max_context:]
        batch_weights = batch_weights[:, -model.cfg.max_context:]
    normalized, _ = _normalize_for_training(batch_values, batch_weights, scaler_cfg, use_global)
    num_patches = normalized.shape[-1] // patch
    if num_patches < 2:
        return None, 0.0
    feats = model.token_features(normalized, id_mask=id_mask)
    if not np.all(np.isfinite(feats.data)):
        raise FloatingPointError("non-finite backbone features")
    pred = feats[:, :-1]  # token p predicts patch p+1
    targets = normalized[:, patch:].reshape(normalized.shape[0], num_patches - 1, patch)
    loss_w = batch_weights[:, patch:].reshape(targets.shape)
    count = float(loss_w.sum())
    if count == 0.0:
        return None, 0.0
    params = smm.compute_params(pred, model.head_params())
    return smm.composite_loss(params, targets, loss_w, loss_cfg), count


def make_checkpoint(model: Model, state: AdamState, step: int,
                    rng: Rng | None, train_cfg: TrainConfig) -> Checkpoint:
    return Checkpoint(
        config=model.cfg,
        params={k: v.data.copy() for k, v in model.params.items()},
        step=step,
        opt_m={k: v.copy() for k, v in state.m.items()},
        opt_v={k: v.copy() for k, v in state.v.items()},
        opt_t=state.t,
        rng_state=rng.get_state() if rng is not None else None,
        ablations={
            "disable_variate_attention": train_cfg.disable_variate_attention,
            "disable_robust_loss": train_cfg.disable_robust_loss,
            "single_student_t": train_cfg.single_student_t,
            "global_scaling": train_cfg.global_scaling,
        },
    )


def train(model_cfg: ModelConfig, dataset: list[MultivariateSeries],
          train_cfg: TrainConfig, loss_cfg: smm.LossConfig | None = None,
          scaler_cfg: ScalerConfig | None = None,
          shuffle_cfg: ShuffleConfig | None = None) -> TrainResult:
    if not dataset:
        raise ValueError("train: dataset is empty")
    loss_cfg = loss_cfg or smm.LossConfig()
    scaler_cfg = scaler_cfg or ScalerConfig(patch_size=model_cfg.patch_size)
    if scaler_cfg.patch_size != model_cfg.patch_size:
        raise ValueError("scaler patch_size must match the model patch_size")
    shuffle_cfg = shuffle_cfg or ShuffleConfig()
    model_cfg, loss_cfg = apply_ablations(model_cfg, loss_cfg, train_cfg)

    root = Rng(train_cfg.seed)
    model = Model(model_cfg, rng=root.child(0),
                  disable_variate_attention=train_cfg.disable_variate_attention)
    batch_rng = root.child(1)
    data_rng = root.child(2)

    trainable = model.trainable()
    state = AdamState()
    loss_log: list[tuple[int, float, float]] = []
    last_good = make_checkpoint(model, state, 0, batch_rng, train_cfg)

    for step in range(train_cfg.total_steps):
        picks = batch_rng.choice(len(dataset), size=train_cfg.batch_size, replace=True)
        batch_series = [dataset[int(i)] for i in picks]
        packs = preprocess_batch(batch_series, model_cfg.patch_size,
                                 max_variates=train_cfg.max_variates,
                                 offset_rng=data_rng, shuffle=shuffle_cfg)

        lr = wsd_lr(step, train_cfg)
        try:
            total: Tensor | None = None
            total_count = 0.0
            for pack in packs:
                loss, count = _batch_loss(model, pack.values, pack.weights, pack.id_mask,
                                          scaler_cfg, loss_cfg, train_cfg.global_scaling)
                if loss is None:
                    continue
                piece = loss * count
                total = piece if total is None else total + piece
                total_count += count
            if total is None:
                continue
            loss = total * (1.0 / total_count)

            loss_value = float(loss.data)
            if not math.isfinite(loss_value):
                raise FloatingPointError("non-finite loss")

            nk.backward(loss)
            clip_global_norm(trainable, train_cfg.grad_clip)
            adamw_step(trainable, state, lr, train_cfg)
        except FloatingPointError:
            raise TrainingDiverged(step, last_good, loss_log) from None
        for p in trainable.values():
            p.zero_grad()
        loss_log.append((step, loss_value, lr))

        if train_cfg.checkpoint_every and (step + 1) % train_cfg.checkpoint_every == 0:
            last_good = make_checkpoint(model, state, step + 1, batch_rng, train_cfg)

    final = make_checkpoint(model, state, train_cfg.total_steps, batch_rng, train_cfg)
    return TrainResult(checkpoint=final, loss_log=loss_log)


def held_out_nll(model: Model, dataset: list[MultivariateSeries],
                 scaler_cfg: ScalerConfig, use_global: bool = False) -> float:
    """Teacher-forced negative log-likelihood in the raw data space.

    Densities are corrected by the log of the normalization scale at each
    position, so arms with different scaling schemes stay comparable.
    """
    patch = model.cfg.patch_size
    total_nll = 0.0
    total_count = 0.0
    with nk.no_grad():
        for series in dataset:
            values, weights = series.values, series.weights
            pad = (-values.shape[-1]) % patch
            if pad:
                z = np.zeros((values.shape[0], pad))
                values = np.concatenate([z, values], axis=1)
                weights = np.concatenate([z, weights], axis=1)
            if values.shape[-1] > model.cfg.max_context:
                values = values[:, -model.cfg.max_context:]
                weights = weights[:, -model.cfg.max_context:]
            normalized, pos_scale = _normalize_for_training(values, weights, scaler_cfg,
                                                            use_global)
            num_patches = normalized.shape[-1] // patch
            if num_patches < 2:
                continue
            feats = model.token_features(normalized)
            pred = feats[:, :-1]
            targets = normalized[:, patch:].reshape(values.shape[0], num_patches - 1, patch)
            mask = weights[:, patch:].reshape(targets.shape)
            params = smm.compute_params(pred, model.head_params())
            mixture_lp = smm.mixture_log_prob(params, targets).data
            jac = np.log(pos_scale[:, patch:].reshape(targets.shape))
            nll = -(mixture_lp - jac)
            total_nll += float((nll * mask).sum())
            total_count += float(mask.sum())
    if total_count == 0.0:
        raise ValueError("held_out_nll: no scoreable timesteps")
    return total_nll / total_count
