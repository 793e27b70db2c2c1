"""Synthetic series generation, dataset IO, and batch preprocessing."""

from .io import DatasetFormatError, load_dataset, save_dataset
from .preprocess import Batch, ShuffleConfig, preprocess_batch
from .series import FREQ_STEP_SECONDS, MultivariateSeries
from .synthetic import SynthConfig, generate_synthetic

__all__ = [
    "Batch",
    "DatasetFormatError",
    "FREQ_STEP_SECONDS",
    "MultivariateSeries",
    "ShuffleConfig",
    "SynthConfig",
    "generate_synthetic",
    "load_dataset",
    "preprocess_batch",
    "save_dataset",
]
