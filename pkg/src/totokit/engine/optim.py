"""AdamW with decoupled weight decay and the warmup-stable-decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numkit import Tensor


@dataclass
class TrainConfig:
    lr: float = 3e-3
    betas: tuple[float, float] = (0.9579, 0.9581)
    weight_decay: float = 0.0014
    warmup_steps: int = 200
    stable_steps: int = 1400
    decay_steps: int = 400
    batch_size: int = 3           # series sampled per step
    total_steps: int = 2000
    seed: int = 0
    grad_clip: float = 1.0        # global-norm ceiling, 0 disables
    adam_eps: float = 1e-8
    checkpoint_every: int = 0     # 0: only the final checkpoint
    max_variates: int = 32
    # ablation arms
    disable_variate_attention: bool = False
    disable_robust_loss: bool = False
    single_student_t: bool = False
    global_scaling: bool = False

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.warmup_steps + self.stable_steps + self.decay_steps != self.total_steps:
            raise ValueError("warmup + stable + decay must equal total_steps")


def wsd_lr(step: int, cfg: TrainConfig) -> float:
    """Linear ramp to lr, constant plateau, linear decay to zero."""
    if not 0 <= step < cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps})")
    if step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    if step < cfg.warmup_steps + cfg.stable_steps:
        return cfg.lr
    into_decay = step - cfg.warmup_steps - cfg.stable_steps
    return cfg.lr * (1.0 - into_decay / cfg.decay_steps)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adamw_step(params: dict[str, Tensor], state: AdamState, lr: float,
               cfg: TrainConfig) -> None:
    """One decoupled-weight-decay Adam update from the grads stored on params."""
    beta1, beta2 = cfg.betas
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.data *= 1.0 - lr * cfg.weight_decay  # decay before the Adam delta
        p.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def clip_global_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most max_norm; returns the norm."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
