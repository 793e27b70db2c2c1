"""Transformer building blocks: RMSNorm, SwiGLU, rotary embedding, attention."""

from __future__ import annotations

import math

import numpy as np

from .. import numkit as nk
from ..numkit import Tensor

RMS_EPS = 1e-6
ROPE_BASE = 10000.0
# additive logit mask; large-but-finite so fully-masked padding rows stay NaN-free
MASK_FILL = -1e30


class MacCounter:
    """Counts attention multiply-accumulates (scores only; the value-aggregation
    term is identical and its shared factor is folded out)."""

    def __init__(self):
        self.total = 0

    def add_attention(self, rows: int, seq: int, dim: int) -> None:
        self.total += rows * seq * seq * dim


def rmsnorm(x: Tensor, gain: Tensor) -> Tensor:
    """x / sqrt(mean(x^2) + eps) * gain over the last axis."""
    x = nk.as_tensor(x)
    d = x.shape[-1]
    ms = nk.tmean(x * x, axis=-1) + RMS_EPS
    return x / nk.expand_last(nk.sqrt(ms), d) * gain


def swiglu_ffn(x: Tensor, params: dict[str, Tensor], prefix: str = "") -> Tensor:
    """W_down(silu(W_gate x) * (W_up x)) with biases."""
    x = nk.as_tensor(x)
    gate = nk.silu(nk.matmul(x, params[prefix + "w_gate"]) + params[prefix + "b_gate"])
    up = nk.matmul(x, params[prefix + "w_up"]) + params[prefix + "b_up"]
    return nk.matmul(gate * up, params[prefix + "w_down"]) + params[prefix + "b_down"]


def rope_tables(positions, head_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin tables of shape (len(positions), head_dim/2), base 10000."""
    if head_dim % 2 != 0:
        raise ValueError("rotary embedding requires an even head dimension")
    pos = np.asarray(positions, dtype=np.float64)
    inv_freq = ROPE_BASE ** (-np.arange(0, head_dim, 2, dtype=np.float64) / head_dim)
    angles = np.outer(pos, inv_freq)
    return np.cos(angles), np.sin(angles)


def _rotate(x: Tensor, cos: np.ndarray, sin: np.ndarray) -> Tensor:
    half = x.shape[-1] // 2
    x1 = x[..., :half]
    x2 = x[..., half:]
    return nk.concat([x1 * Tensor(cos) - x2 * Tensor(sin),
                      x1 * Tensor(sin) + x2 * Tensor(cos)], axis=-1)


def rope_apply(q: Tensor, k: Tensor, positions) -> tuple[Tensor, Tensor]:
    """Rotate query/key pairs by position-dependent angles (split-half pairing).

    q and k are (..., T, head_dim); attention scores become functions of
    relative position only.
    """
    q, k = nk.as_tensor(q), nk.as_tensor(k)
    cos, sin = rope_tables(positions, q.shape[-1])
    return _rotate(q, cos, sin), _rotate(k, cos, sin)


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    rows, seq, dim = x.shape
    head_dim = dim // num_heads
    return nk.transpose(nk.reshape(x, (rows, seq, num_heads, head_dim)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    rows, num_heads, seq, head_dim = x.shape
    return nk.reshape(nk.transpose(x, (0, 2, 1, 3)), (rows, seq, num_heads * head_dim))


def multihead_attention(
    x: Tensor,
    mask: np.ndarray,
    params: dict[str, Tensor],
    prefix: str,
    num_heads: int,
    positions=None,
    mac_counter: MacCounter | None = None,
) -> Tensor:
    """Masked scaled-dot-product attention over rows of shape (R, S, D)."""
    mask = np.asarray(mask, dtype=bool)
    if np.any(~mask.any(axis=-1)):
        raise ValueError("attention mask has a row with no attendable key")

    rows, seq, dim = x.shape
    head_dim = dim // num_heads
    q = _split_heads(nk.matmul(x, params[prefix + "wq"]), num_heads)
    k = _split_heads(nk.matmul(x, params[prefix + "wk"]), num_heads)
    v = _split_heads(nk.matmul(x, params[prefix + "wv"]), num_heads)
    if positions is not None:
        q, k = rope_apply(q, k, positions)

    scores = nk.matmul(q, nk.swap_last(k)) * (1.0 / math.sqrt(head_dim))
    additive = np.where(mask, 0.0, MASK_FILL)
    attn = nk.softmax_last(scores + Tensor(additive))
    if mac_counter is not None:
        mac_counter.add_attention(rows, seq, dim)
    out = _merge_heads(nk.matmul(attn, v))
    return nk.matmul(out, params[prefix + "wo"])


def transformer_rows(
    x: Tensor,
    mask: np.ndarray,
    params: dict[str, Tensor],
    prefix: str,
    num_heads: int,
    positions=None,
    mac_counter: MacCounter | None = None,
) -> Tensor:
    """Pre-norm residual block on (R, S, D) rows: attention then SwiGLU."""
    h = x + multihead_attention(
        rmsnorm(x, params[prefix + "attn_norm.gain"]),
        mask, params, prefix + "attn.", num_heads,
        positions=positions, mac_counter=mac_counter,
    )
    return h + swiglu_ffn(rmsnorm(h, params[prefix + "ffn_norm.gain"]), params, prefix + "ffn.")


def attention_block(
    tokens: Tensor,
    kind: str,
    masks,
    params: dict[str, Tensor],
    num_heads: int,
    prefix: str = "",
    mac_counter: MacCounter | None = None,
) -> Tensor:
    """One transformer block on (M, T, D) tokens.

    kind "timewise": causal attention over patch positions with rotary
    embedding, independently per variate. kind "variatewise": bidirectional
    attention across variates restricted by the group id mask, independently
    per position and with no positional encoding.
    """
    tokens = nk.as_tensor(tokens)
    if tokens.ndim != 3:
        raise ValueError(f"attention_block expects (M, T, D) tokens, got {tokens.shape}")
    num_variates, num_patches, _ = tokens.shape
    if kind == "timewise":
        return transformer_rows(
            tokens, masks.causal, params, prefix, num_heads,
            positions=np.arange(num_patches), mac_counter=mac_counter,
        )
    if kind == "variatewise":
        id_mask = masks.id_mask
        if id_mask is None:
            id_mask = np.ones((num_variates, num_variates), dtype=bool)
        flipped = nk.transpose(tokens, (1, 0, 2))
        out = transformer_rows(flipped, id_mask, params, prefix, num_heads,
                               mac_counter=mac_counter)
        return nk.transpose(out, (1, 0, 2))
    raise ValueError(f"unknown attention kind: {kind!r}")
