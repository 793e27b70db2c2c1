"""Architecture configuration and attention mask containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ModelConfig:
    embed_dim: int = 32          # D
    patch_size: int = 8          # P
    num_layers: int = 4
    time_per_variate: int = 3    # N time-wise blocks per variate-wise block
    num_heads: int = 4
    mlp_dim: int = 128
    k_components: int = 3        # mixture components K
    head_feature_dim: int = 32   # D_h
    max_context: int = 256       # maximum input length L

    def __post_init__(self):
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")
        if self.k_components < 1:
            raise ValueError("k_components must be at least 1")
        if self.patch_size < 1:
            raise ValueError("patch_size must be at least 1")
        if self.max_context % self.patch_size != 0:
            raise ValueError("max_context must be divisible by patch_size")
        if self.num_layers < 1:
            raise ValueError("num_layers must be at least 1")
        if self.time_per_variate < 0:
            raise ValueError("time_per_variate must be non-negative")

    def layer_kinds(self) -> list[str]:
        """Block schedule: segments of N time-wise blocks then one variate-wise
        block; leftover layers beyond whole segments are time-wise."""
        seg = self.time_per_variate + 1
        kinds: list[str] = []
        for _ in range(self.num_layers // seg):
            kinds.extend(["time"] * self.time_per_variate)
            kinds.append("variate")
        kinds.extend(["time"] * (self.num_layers - len(kinds)))
        return kinds

    @property
    def max_positions(self) -> int:
        return self.max_context // self.patch_size

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "patch_size": self.patch_size,
            "num_layers": self.num_layers,
            "time_per_variate": self.time_per_variate,
            "num_heads": self.num_heads,
            "mlp_dim": self.mlp_dim,
            "k_components": self.k_components,
            "head_feature_dim": self.head_feature_dim,
            "max_context": self.max_context,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def causal_mask(num_positions: int) -> np.ndarray:
    """Lower-triangular boolean mask: position i may attend j <= i."""
    return np.tril(np.ones((num_positions, num_positions), dtype=bool))


def group_id_mask(group_ids) -> np.ndarray:
    """Boolean M x M mask, true iff two variates share a group id."""
    ids = np.asarray(group_ids)
    return ids[:, None] == ids[None, :]


@dataclass
class AttentionMasks:
    causal: np.ndarray                      # T x T bool, lower triangular
    id_mask: np.ndarray | None = None       # M x M bool, symmetric, true diagonal

    def __post_init__(self):
        c = np.asarray(self.causal, dtype=bool)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("causal mask must be square")
        if not np.array_equal(c, np.tril(np.ones_like(c))):
            raise ValueError("causal mask must be lower triangular")
        if self.id_mask is not None:
            m = np.asarray(self.id_mask, dtype=bool)
            if not np.array_equal(m, m.T) or not np.all(np.diag(m)):
                raise ValueError("id mask must be symmetric with a true diagonal")
