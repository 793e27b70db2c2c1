"""Multivariate series container and sampling-frequency table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# seconds per step for each supported frequency code (M approximates a
# calendar month as 30 days)
FREQ_STEP_SECONDS = {
    "S": 1,
    "T": 60,
    "H": 3600,
    "D": 86400,
    "W": 604800,
    "M": 2592000,
}


@dataclass
class MultivariateSeries:
    id: str
    freq: str
    values: np.ndarray                 # M x L
    weights: np.ndarray | None = None  # M x L in {0, 1}; default all-observed
    start: str | None = None
    metric_type: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValueError(f"series {self.id!r}: values must be a non-empty M x L matrix")
        if self.weights is None:
            self.weights = np.ones_like(self.values)
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != self.values.shape:
            raise ValueError(f"series {self.id!r}: weights shape {self.weights.shape} "
                             f"!= values shape {self.values.shape}")
        if not np.all((self.weights == 0) | (self.weights == 1)):
            raise ValueError(f"series {self.id!r}: weights must be binary")
        if self.freq not in FREQ_STEP_SECONDS:
            raise ValueError(f"series {self.id!r}: unknown frequency code {self.freq!r}")

    @property
    def num_variates(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def step_seconds(self) -> int:
        return FREQ_STEP_SECONDS[self.freq]
