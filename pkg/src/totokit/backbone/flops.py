"""Attention cost model: multiply-accumulate counts for the two schemas.

Counts cover the attention score products (the value-aggregation term is
identical, so the shared factor of two is folded out on both sides); they
match the instrumented forward-pass counter exactly.
"""

from __future__ import annotations

from .config import ModelConfig


def attention_flops(cfg: ModelConfig, num_variates: int, num_patches: int, mode: str) -> int:
    """MACs for a forward pass over M variates and T patch positions.

    mode "factorized": each time-wise layer runs M independent T x T
    attentions and each variate-wise layer runs T independent M x M
    attentions. mode "full": every layer attends jointly over all M*T
    positions.
    """
    m, t, d = int(num_variates), int(num_patches), cfg.embed_dim
    kinds = cfg.layer_kinds()
    if mode == "factorized":
        n_time = sum(1 for k in kinds if k == "time")
        n_var = len(kinds) - n_time
        return n_time * m * t * t * d + n_var * t * m * m * d
    if mode == "full":
        return len(kinds) * m * m * t * t * d
    raise ValueError(f"unknown mode: {mode!r}")
