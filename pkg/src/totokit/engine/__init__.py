"""Training loop, optimizer, forecasting, and checkpoint persistence."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .forecast import forecast, model_from_checkpoint, quantiles
from .optim import AdamState, TrainConfig, adamw_step, clip_global_norm, wsd_lr
from .train import (
    TrainingDiverged,
    TrainResult,
    apply_ablations,
    global_normalize,
    held_out_nll,
    make_checkpoint,
    train,
)

__all__ = [
    "AdamState",
    "Checkpoint",
    "CheckpointError",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "adamw_step",
    "apply_ablations",
    "clip_global_norm",
    "forecast",
    "global_normalize",
    "held_out_nll",
    "load_checkpoint",
    "make_checkpoint",
    "model_from_checkpoint",
    "quantiles",
    "save_checkpoint",
    "train",
]
