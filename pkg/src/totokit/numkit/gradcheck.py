"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .rng import Rng
from .tensor import Tensor, backward, no_grad


def finite_difference_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-6,
    max_coords: int | None = None,
    rng: Rng | None = None,
) -> float:
    """Max relative error between analytic gradients of f and central differences.

    Per coordinate i: |analytic_i - (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps)|
    divided by max(1, |analytic_i|). Checks every coordinate unless
    max_coords caps the number of (seeded, random) probe coordinates.
    """
    if eps <= 0:
        raise ValueError("finite_difference_check: eps must be positive")

    probe = Tensor(x.data.copy(), requires_grad=True)
    loss = f(probe)
    if not np.all(np.isfinite(loss.data)):
        raise FloatingPointError("finite_difference_check: non-finite loss value")
    backward(loss)
    analytic = probe.grad
    if analytic is None or not np.all(np.isfinite(analytic)):
        raise FloatingPointError("finite_difference_check: non-finite analytic gradient")

    work = x.data.copy()
    flat = work.reshape(-1)  # view of the contiguous copy
    n = flat.size
    if max_coords is not None and n > max_coords:
        coords = (rng or Rng(0)).choice(n, size=max_coords, replace=False)
    else:
        coords = np.arange(n)

    worst = 0.0
    analytic_flat = analytic.reshape(-1)
    for i in coords:
        base = flat[i]
        with no_grad():
            flat[i] = base + eps
            hi = float(f(Tensor(work)).data)
            flat[i] = base - eps
            lo = float(f(Tensor(work)).data)
        flat[i] = base
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError("finite_difference_check: non-finite intermediate value")
        numeric = (hi - lo) / (2.0 * eps)
        err = abs(analytic_flat[i] - numeric) / max(1.0, abs(analytic_flat[i]))
        worst = max(worst, err)
    return worst
