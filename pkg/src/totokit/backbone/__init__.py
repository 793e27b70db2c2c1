"""Decoder-only transformer with proportional time-wise/variate-wise attention."""

from .config import AttentionMasks, ModelConfig, causal_mask, group_id_mask
from .flops import attention_flops
from .layers import (
    MacCounter,
    attention_block,
    multihead_attention,
    rmsnorm,
    rope_apply,
    rope_tables,
    swiglu_ffn,
)
from .model import Model, init_params, patch_embed

__all__ = [
    "AttentionMasks",
    "MacCounter",
    "Model",
    "ModelConfig",
    "attention_block",
    "attention_flops",
    "causal_mask",
    "group_id_mask",
    "init_params",
    "multihead_attention",
    "patch_embed",
    "rmsnorm",
    "rope_apply",
    "rope_tables",
    "swiglu_ffn",
]
