"""Dense float64 tensors with reverse-mode automatic differentiation.

Arrays are backed by numpy. Every differentiable op records a backward
closure on its result; `backward()` walks the resulting DAG once in
reverse topological order. Values are immutable after construction
except for the grad buffers.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np
from scipy import special as _special


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class GraphError(RuntimeError):
    """Raised when backward is called on an unusable graph."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable provenance recording inside the block (forward-only paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return tslice(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    """Shapes must match exactly, be scalar, or one a trailing suffix of the other."""
    sa, sb = a.shape, b.shape
    if sa == sb or sa == () or sb == ():
        return
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if big[len(big) - len(small):] != small:
        raise ShapeError(f"{op}: shapes {sa} and {sb} are not broadcast-compatible "
                         "(leading-axis expansion only)")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise binary ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0.0):
        raise ZeroDivisionError("div: divisor contains zero")
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "maximum")
    out_data = np.maximum(a.data, b.data)
    a_wins = a.data >= b.data  # ties route to the first operand

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * a_wins, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~a_wins, b.shape))

    return _make(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# elementwise unary ops
# ---------------------------------------------------------------------------

def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(-g)

    return _make(-a.data, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * out_data)

    return _make(out_data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log: argument must be strictly positive")
    out_data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _make(out_data, (a,), backward)


def log1p(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= -1.0):
        raise ValueError("log1p: argument must exceed -1")
    out_data = np.log1p(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g / (1.0 + a.data))

    return _make(out_data, (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0.0):
        raise ValueError("sqrt: argument must be non-negative")
    out_data = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * 0.5 / out_data)

    return _make(out_data, (a,), backward)


def power(a, exponent: float) -> Tensor:
    """Elementwise a**c for a constant exponent."""
    a = as_tensor(a)
    c = float(exponent)
    out_data = a.data ** c

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * c * a.data ** (c - 1.0))

    return _make(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # stable in both tails
    out_data = np.where(a.data >= 0,
                        1.0 / (1.0 + np.exp(-np.abs(a.data))),
                        np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def silu(a) -> Tensor:
    """z * sigmoid(z)."""
    a = as_tensor(a)
    sig = np.where(a.data >= 0,
                   1.0 / (1.0 + np.exp(-np.abs(a.data))),
                   np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    out_data = a.data * sig

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (sig + a.data * sig * (1.0 - sig)))

    return _make(out_data, (a,), backward)


def softplus(a) -> Tensor:
    """log(1 + e^x), computed without overflow."""
    a = as_tensor(a)
    out_data = np.logaddexp(0.0, a.data)
    sig = np.where(a.data >= 0,
                   1.0 / (1.0 + np.exp(-np.abs(a.data))),
                   np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * sig)

    return _make(out_data, (a,), backward)


def gammaln(a) -> Tensor:
    """Log-gamma; derivative is the digamma function."""
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ValueError("gammaln: argument must be strictly positive")
    out_data = _special.gammaln(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * _special.digamma(a.data))

    return _make(out_data, (a,), backward)


def clamp(a, min_value: float | None = None, max_value: float | None = None) -> Tensor:
    """Clip into [min_value, max_value]; gradient passes only inside the range."""
    a = as_tensor(a)
    lo = -np.inf if min_value is None else float(min_value)
    hi = np.inf if max_value is None else float(max_value)
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * inside)

    return _make(out_data, (a,), backward)


def where(mask, a, b) -> Tensor:
    """Select a where mask is true, b elsewhere; mask is a constant boolean array."""
    a, b = as_tensor(a), as_tensor(b)
    m = np.asarray(mask, dtype=bool)
    out_data = np.where(m, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(np.where(m, g, 0.0), a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(np.where(m, 0.0, g), b.shape))

    return _make(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product; supports 2D@2D, batched ND@ND with equal leading dims,
    and ND@2D (shared weight on the right)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} and {b.shape}")
    if a.ndim != b.ndim and b.ndim != 2:
        raise ShapeError(f"matmul: unsupported batching for {a.shape} and {b.shape}")
    if a.ndim == b.ndim and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: leading dimensions differ for {a.shape} and {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                ga = a.data.reshape(-1, a.shape[-1])
                gg = g.reshape(-1, g.shape[-1])
                b.accumulate_grad(ga.T @ gg)
            else:
                b.accumulate_grad(np.swapaxes(a.data, -1, -2) @ g)

    return _make(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# reductions and last-axis fused ops
# ---------------------------------------------------------------------------

def tsum(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a.accumulate_grad(np.full_like(a.data, g))
            else:
                a.accumulate_grad(np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

    return _make(out_data, (a,), backward)


def tmean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    out_data = a.data.mean(axis=axis)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a.accumulate_grad(np.full_like(a.data, g / n))
            else:
                a.accumulate_grad(np.broadcast_to(np.expand_dims(g, axis), a.shape) / n)

    return _make(out_data, (a,), backward)


def softmax_last(a) -> Tensor:
    """Softmax over the last axis (max-shifted for stability)."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=-1, keepdims=True)
            a.accumulate_grad(out_data * (g - dot))

    return _make(out_data, (a,), backward)


def logsumexp_last(a) -> Tensor:
    """log(sum(exp(x))) over the last axis; drops that axis."""
    a = as_tensor(a)
    m = a.data.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)  # all -inf rows stay -inf without NaN
    e = np.exp(a.data - m)
    s = e.sum(axis=-1, keepdims=True)
    out_data = (np.log(s) + m).squeeze(-1)
    soft = e / s

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.expand_dims(g, -1) * soft)

    return _make(out_data, (a,), backward)


def cumsum_last(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.cumsum(a.data, axis=-1)

    def backward(g):
        if a.requires_grad:
            rev = np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1)
            a.accumulate_grad(rev)

    return _make(out_data, (a,), backward)


def expand_last(a, n: int) -> Tensor:
    """Repeat a (...)-shaped tensor into (..., n); the explicit inner broadcast."""
    a = as_tensor(a)
    out_data = np.broadcast_to(a.data[..., None], a.shape + (int(n),)).copy()

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.sum(axis=-1))

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    out_data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out_data = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.transpose(g, inverse))

    return _make(out_data, (a,), backward)


def swap_last(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    perm = list(range(a.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(a, perm)


def tslice(a, key) -> Tensor:
    """Basic slicing; gradient scatters back into place."""
    a = as_tensor(a)
    out_data = a.data[key]

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[key] = g
            a.accumulate_grad(buf)

    return _make(out_data, (a,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p.accumulate_grad(g[tuple(idx)])

    return _make(out_data, tuple(parts), backward)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Fill grad buffers of every reachable requires_grad tensor with d(loss)/d(input).

    Repeated calls accumulate. Loss must be a scalar with intact provenance.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward: loss must be a Tensor")
    if loss.size != 1:
        raise GraphError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("backward: loss has no gradient provenance (detached graph)")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    # intermediates hold per-pass gradients only; leaves accumulate across calls
    for node in topo:
        if node._backward is not None:
            node.grad = None

    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
