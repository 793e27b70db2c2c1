"""Decoder-only forecasting backbone.

Input series are already normalized and padded to a whole number of
patches. Patch tokens flow through segments of time-wise blocks followed
by one variate-wise block; the final token stream is unembedded into
per-timestep features where token p carries the features that predict
every timestep of patch p+1.
"""

from __future__ import annotations

import numpy as np

from .. import numkit as nk
from ..numkit import Rng, Tensor
from .config import AttentionMasks, ModelConfig, causal_mask
from .layers import MacCounter, rmsnorm, transformer_rows


def init_params(cfg: ModelConfig, rng: Rng) -> dict[str, Tensor]:
    """Named parameter arrays for the full model, fan-in scaled init."""
    params: dict[str, Tensor] = {}

    def linear(name: str, fan_in: int, fan_out: int):
        params[name + ".w"] = Tensor(rng.normal((fan_in, fan_out)) / np.sqrt(fan_in),
                                     requires_grad=True)
        params[name + ".b"] = Tensor(np.zeros(fan_out), requires_grad=True)

    d, mlp = cfg.embed_dim, cfg.mlp_dim
    linear("patch_embed", cfg.patch_size, d)
    for i in range(cfg.num_layers):
        base = f"layers.{i}."
        params[base + "attn_norm.gain"] = Tensor(np.ones(d), requires_grad=True)
        for proj in ("wq", "wk", "wv", "wo"):
            params[base + "attn." + proj] = Tensor(rng.normal((d, d)) / np.sqrt(d),
                                                   requires_grad=True)
        params[base + "ffn_norm.gain"] = Tensor(np.ones(d), requires_grad=True)
        params[base + "ffn.w_gate"] = Tensor(rng.normal((d, mlp)) / np.sqrt(d), requires_grad=True)
        params[base + "ffn.b_gate"] = Tensor(np.zeros(mlp), requires_grad=True)
        params[base + "ffn.w_up"] = Tensor(rng.normal((d, mlp)) / np.sqrt(d), requires_grad=True)
        params[base + "ffn.b_up"] = Tensor(np.zeros(mlp), requires_grad=True)
        params[base + "ffn.w_down"] = Tensor(rng.normal((mlp, d)) / np.sqrt(mlp),
                                             requires_grad=True)
        params[base + "ffn.b_down"] = Tensor(np.zeros(d), requires_grad=True)
    params["final_norm.gain"] = Tensor(np.ones(d), requires_grad=True)
    linear("unembed", d, cfg.patch_size * cfg.head_feature_dim)
    for name in ("nu", "mu", "tau", "pi"):
        params[f"head.w_{name}"] = Tensor(rng.normal((cfg.k_components, cfg.head_feature_dim)) * 0.02,
                                          requires_grad=True)
        params[f"head.b_{name}"] = Tensor(np.zeros(cfg.k_components), requires_grad=True)
    return params


def patch_embed(normalized: Tensor, weight: Tensor, bias: Tensor, patch_size: int) -> Tensor:
    """Shared linear map from non-overlapping windows of P values to D-dim tokens."""
    x = nk.as_tensor(normalized)
    length = x.shape[-1]
    if length % patch_size != 0:
        raise ValueError(f"length {length} is not divisible by patch size {patch_size}")
    windows = nk.reshape(x, x.shape[:-1] + (length // patch_size, patch_size))
    return nk.matmul(windows, weight) + bias


class Model:
    """Backbone plus mixture head parameters; one instance per training run."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None,
                 rng: Rng | None = None, disable_variate_attention: bool = False):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, rng or Rng(0))
        self.disable_variate_attention = disable_variate_attention

    def head_params(self) -> dict[str, Tensor]:
        return {k.split(".", 1)[1]: v for k, v in self.params.items() if k.startswith("head.")}

    def trainable(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if v.requires_grad}

    def layer_kinds(self) -> list[str]:
        kinds = self.cfg.layer_kinds()
        if self.disable_variate_attention:
            kinds = ["time"] * len(kinds)
        return kinds

    def token_features(self, normalized, id_mask: np.ndarray | None = None,
                       mac_counter: MacCounter | None = None) -> Tensor:
        """Features per token: (B, M, T, P, D_h); token p predicts patch p+1."""
        cfg = self.cfg
        x = nk.as_tensor(normalized)
        squeeze = x.ndim == 2
        if squeeze:
            x = nk.reshape(x, (1,) + x.shape)
        batch, variates, length = x.shape
        if length % cfg.patch_size != 0:
            raise ValueError(f"length {length} is not divisible by patch size {cfg.patch_size}")
        patches = length // cfg.patch_size
        if patches > cfg.max_positions:
            raise ValueError(f"{patches} patches exceed the model maximum {cfg.max_positions}")

        tokens = patch_embed(x, self.params["patch_embed.w"], self.params["patch_embed.b"],
                             cfg.patch_size)
        masks = AttentionMasks(causal=causal_mask(patches), id_mask=id_mask)
        positions = np.arange(patches)

        for i, kind in enumerate(self.layer_kinds()):
            prefix = f"layers.{i}."
            if kind == "time":
                rows = nk.reshape(tokens, (batch * variates, patches, cfg.embed_dim))
                rows = transformer_rows(rows, masks.causal, self.params, prefix,
                                        cfg.num_heads, positions=positions,
                                        mac_counter=mac_counter)
                tokens = nk.reshape(rows, (batch, variates, patches, cfg.embed_dim))
            else:
                vmask = masks.id_mask
                if vmask is None:
                    vmask = np.ones((variates, variates), dtype=bool)
                rows = nk.reshape(nk.transpose(tokens, (0, 2, 1, 3)),
                                  (batch * patches, variates, cfg.embed_dim))
                rows = transformer_rows(rows, vmask, self.params, prefix,
                                        cfg.num_heads, mac_counter=mac_counter)
                tokens = nk.transpose(nk.reshape(rows, (batch, patches, variates, cfg.embed_dim)),
                                      (0, 2, 1, 3))

        tokens = rmsnorm(tokens, self.params["final_norm.gain"])
        unembedded = nk.matmul(tokens, self.params["unembed.w"]) + self.params["unembed.b"]
        feats = nk.reshape(unembedded,
                           (batch, variates, patches, cfg.patch_size, cfg.head_feature_dim))
        if squeeze:
            feats = nk.reshape(feats, feats.shape[1:])
        return feats

    def forward(self, normalized, id_mask: np.ndarray | None = None,
                mac_counter: MacCounter | None = None) -> Tensor:
        """Per-timestep features (M, L, D_h), aligned so the features at the
        timesteps of patch p come from token p-1; patch 0 has no predecessor
        and its rows are zero."""
        x = np.asarray(nk.as_tensor(normalized).data)
        if x.ndim != 2:
            raise ValueError(f"forward expects (M, L) input, got shape {x.shape}")
        variates, length = x.shape
        feats = self.token_features(x, id_mask=id_mask, mac_counter=mac_counter)
        cfg = self.cfg
        lead = Tensor(np.zeros((variates, 1, cfg.patch_size, cfg.head_feature_dim)))
        shifted = nk.concat([lead, feats[:, :-1]], axis=1)
        return nk.reshape(shifted, (variates, length, cfg.head_feature_dim))
