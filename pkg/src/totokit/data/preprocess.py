"""Training-batch assembly: alignment padding, time offsets, variate packing.

Series are left-padded (weight 0) so lengths divide the patch size; a
random extra offset of [0, P) padding steps varies how real data lands on
the patch grid without dropping any observation. Variates from multiple
series pack into items of at most max_variates rows, with a group-id mask
recording original-series membership for variate-wise attention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit import Rng
from .series import MultivariateSeries


@dataclass
class ShuffleConfig:
    mode: str = "adjacent"   # adjacent | normal | random | none
    probability: float = 0.14
    normal_std: float = 1.0

    def __post_init__(self):
        if self.mode not in ("adjacent", "normal", "random", "none"):
            raise ValueError(f"unknown shuffle mode {self.mode!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("shuffle probability must lie in [0, 1]")


@dataclass
class Batch:
    values: np.ndarray     # M_total x L
    weights: np.ndarray    # M_total x L
    id_mask: np.ndarray    # M_total x M_total bool
    group_ids: np.ndarray  # M_total ints: original-series membership


def _left_pad(values: np.ndarray, weights: np.ndarray, pad: int) -> tuple[np.ndarray, np.ndarray]:
    if pad == 0:
        return values, weights
    m = values.shape[0]
    zeros = np.zeros((m, pad))
    return np.concatenate([zeros, values], axis=1), np.concatenate([zeros, weights], axis=1)


def _interleave_order(group_ids: np.ndarray, mode: str, rng: Rng | None,
                      normal_std: float) -> np.ndarray:
    n = group_ids.size
    if mode == "adjacent":
        # round-robin across series: variate 0 of each series, then variate 1, ...
        ranks = np.zeros(n, dtype=int)
        seen: dict[int, int] = {}
        for i, g in enumerate(group_ids):
            ranks[i] = seen.get(g, 0)
            seen[g] = ranks[i] + 1
        return np.lexsort((np.arange(n), group_ids, ranks))
    if mode == "random":
        return rng.permutation(n)
    if mode == "normal":
        targets = np.arange(n) + np.rint(rng.normal(n) * normal_std)
        return np.lexsort((np.arange(n), targets))
    raise ValueError(f"unknown shuffle mode {mode!r}")


def preprocess_batch(
    series: list[MultivariateSeries],
    patch_size: int,
    max_variates: int = 32,
    offset_rng: Rng | None = None,
    shuffle: ShuffleConfig | None = None,
) -> list[Batch]:
    """Pack a list of series into batch items ready for the model."""
    if not series:
        raise ValueError("preprocess_batch: empty input")
    if patch_size < 1:
        raise ValueError("patch_size must be at least 1")
    shuffle = shuffle or ShuffleConfig(mode="none", probability=0.0)

    prepared = []
    for s in series:
        offset = int(offset_rng.integers(0, patch_size)) if offset_rng is not None else 0
        values = s.values[:max_variates]
        weights = s.weights[:max_variates]
        length = values.shape[1] + offset
        pad = offset + (-length) % patch_size
        values, weights = _left_pad(values, weights, pad)
        prepared.append((values, weights))

    # greedy packing by variate budget
    packs: list[list[int]] = [[]]
    used = 0
    for idx, (values, _) in enumerate(prepared):
        m = values.shape[0]
        if packs[-1] and used + m > max_variates:
            packs.append([])
            used = 0
        packs[-1].append(idx)
        used += m

    batches = []
    for pack in packs:
        max_len = max(prepared[i][0].shape[1] for i in pack)
        rows_v, rows_w, gids = [], [], []
        for i in pack:
            values, weights = prepared[i]
            extra = max_len - values.shape[1]  # multiple of patch_size
            values, weights = _left_pad(values, weights, extra)
            rows_v.append(values)
            rows_w.append(weights)
            gids.extend([i] * values.shape[0])
        values = np.concatenate(rows_v, axis=0)
        weights = np.concatenate(rows_w, axis=0)
        group_ids = np.asarray(gids)

        if (shuffle.mode != "none" and len(pack) > 1 and offset_rng is not None
                and offset_rng.uniform() < shuffle.probability):
            order = _interleave_order(group_ids, shuffle.mode, offset_rng, shuffle.normal_std)
            values, weights, group_ids = values[order], weights[order], group_ids[order]

        id_mask = group_ids[:, None] == group_ids[None, :]
        batches.append(Batch(values=values, weights=weights, id_mask=id_mask,
                             group_ids=group_ids))
    return batches
