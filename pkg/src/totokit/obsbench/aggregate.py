"""Cross-task aggregation: shifted geometric mean, imputation, mean ranks."""

from __future__ import annotations

import numpy as np
from scipy import stats as _stats


def aggregate_shifted_geomean(values, epsilon: float = 1e-5) -> float:
    """exp(mean(log(v + eps))) + eps; tolerates zeros, rejects negatives."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty value list")
    if np.any(arr < 0.0):
        raise ValueError("shifted geometric mean requires non-negative values")
    if np.all(arr == arr[0]):
        # exact value of exp(mean(log(v+eps)))+eps; skips exp/log roundoff
        return float(arr[0] + 2.0 * epsilon)
    return float(np.exp(np.mean(np.log(arr + epsilon))) + epsilon)


def impute_invalid(values) -> np.ndarray:
    """Replace non-finite entries with the mean of the finite ones."""
    arr = np.asarray(list(values), dtype=np.float64)
    finite = np.isfinite(arr)
    if not finite.any():
        raise ValueError("impute_invalid: no finite values to average")
    out = arr.copy()
    out[~finite] = arr[finite].mean()
    return out


def rank_models(crps_matrix: np.ndarray) -> np.ndarray:
    """Mean rank per model (rows) across tasks (columns); ties share the average rank."""
    mat = np.asarray(crps_matrix, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("crps_matrix must be models x tasks")
    if not np.all(np.isfinite(mat)):
        raise ValueError("crps_matrix contains non-finite entries; impute first")
    ranks = np.empty_like(mat)
    for j in range(mat.shape[1]):
        ranks[:, j] = _stats.rankdata(mat[:, j], method="average")
    return ranks.mean(axis=1)
