"""Student-T mixture output head and the composite training loss.

The head maps backbone features to K mixture components per position:
weights pi (softmax), locations mu, squared scales tau (softplus, floored
at machine epsilon), and degrees of freedom nu = 2 + softplus(.) so first
and second moments always exist. The training loss blends the mixture
negative log-likelihood with a pointwise robust penalty on the mixture
mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .numkit import Rng, Tensor

EPS = float(np.finfo(np.float64).eps)
# smallest representable value strictly above 2: "2 + eps" rounds back to 2
# at this magnitude, so the dof floor must sit one ulp up to keep nu > 2
NU_FLOOR = float(np.nextafter(2.0, np.inf))
LOG_PI = math.log(math.pi)


@dataclass
class LossConfig:
    lambda_nll: float = 0.5755
    alpha: float = 0.0
    delta: float = 0.1010

    def __post_init__(self):
        if not 0.0 <= self.lambda_nll <= 1.0:
            raise ValueError("lambda_nll must lie in [0, 1]")
        if self.alpha > 2.0:
            raise ValueError("alpha must be <= 2")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")


@dataclass
class MixtureParams:
    """Per-position mixture parameters, each shaped (..., K)."""

    pi: Tensor
    mu: Tensor
    tau: Tensor
    nu: Tensor
    log_pi: Tensor = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.pi = nk.as_tensor(self.pi)
        self.mu = nk.as_tensor(self.mu)
        self.tau = nk.as_tensor(self.tau)
        self.nu = nk.as_tensor(self.nu)
        if self.log_pi is None:
            self.log_pi = nk.log(nk.clamp(self.pi, min_value=1e-300))

    @property
    def num_components(self) -> int:
        return self.pi.shape[-1]

    def validate(self) -> None:
        if np.any(np.abs(self.pi.data.sum(axis=-1) - 1.0) > 1e-9):
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.tau.data <= 0.0):
            raise ValueError("tau must be positive")
        if np.any(self.nu.data <= 2.0):
            raise ValueError("nu must exceed 2")


def init_head(rng: Rng, feature_dim: int, k: int, scale: float = 0.02) -> dict[str, Tensor]:
    """Fresh head parameters: four (K x D_h) projections with biases."""
    params = {}
    for name in ("nu", "mu", "tau", "pi"):
        params[f"w_{name}"] = Tensor(rng.normal((k, feature_dim)) * scale, requires_grad=True)
        params[f"b_{name}"] = Tensor(np.zeros(k), requires_grad=True)
    return params


def compute_params(h: Tensor, head: dict[str, Tensor]) -> MixtureParams:
    """Mixture parameters from features h of shape (..., D_h).

    nu = 2 + max(softplus(.), eps); tau = max(softplus(.), eps);
    mu raw; pi via softmax over the K logits.
    """
    h = nk.as_tensor(h)
    batch_shape = h.shape[:-1]
    d = h.shape[-1]
    flat = nk.reshape(h, (-1, d)) if h.ndim != 2 else h

    def proj(name: str) -> Tensor:
        out = nk.matmul(flat, nk.swap_last(head[f"w_{name}"])) + head[f"b_{name}"]
        k = head[f"w_{name}"].shape[0]
        return nk.reshape(out, batch_shape + (k,))

    nu = nk.clamp(nk.clamp(nk.softplus(proj("nu")), min_value=EPS) + 2.0,
                  min_value=NU_FLOOR)
    mu = proj("mu")
    tau = nk.clamp(nk.softplus(proj("tau")), min_value=EPS)
    logits = proj("pi")
    pi = nk.softmax_last(logits)
    log_pi = logits - nk.expand_last(nk.logsumexp_last(logits), logits.shape[-1])
    return MixtureParams(pi=pi, mu=mu, tau=tau, nu=nu, log_pi=log_pi)


def mixture_log_prob(params: MixtureParams, x) -> Tensor:
    """log p(x) under the mixture; x has the params' batch shape."""
    params.validate()
    k = params.num_components
    x_e = nk.expand_last(nk.as_tensor(x), k)
    nu, mu, tau = params.nu, params.mu, params.tau

    half_nu = nu * 0.5
    half_nu1 = (nu + 1.0) * 0.5
    z2 = (x_e - mu) * (x_e - mu) / (nu * tau)
    log_t = (
        nk.gammaln(half_nu1)
        - nk.gammaln(half_nu)
        - (nk.log(nu) + LOG_PI + nk.log(tau)) * 0.5
        - half_nu1 * nk.log1p(z2)
    )
    return nk.logsumexp_last(params.log_pi + log_t)


def log_prob(params: MixtureParams, x: float) -> float:
    """Scalar convenience wrapper around mixture_log_prob."""
    return float(mixture_log_prob(params, x).data)


def mixture_mean(params: MixtureParams) -> Tensor:
    """E[x] = sum_k pi_k mu_k."""
    return nk.tsum(params.pi * params.mu, axis=-1)


def mixture_variance(params: MixtureParams) -> Tensor:
    """Var[x] = sum_k pi_k (tau_k nu_k/(nu_k-2) + mu_k^2) - mean^2."""
    second = nk.tsum(params.pi * (params.tau * params.nu / (params.nu - 2.0)
                                  + params.mu * params.mu), axis=-1)
    mean = mixture_mean(params)
    return second - mean * mean


def sample(params: MixtureParams, rng: Rng, n: int) -> np.ndarray:
    """Draw n values per position: component k ~ Cat(pi), then a scaled Student-T.

    Returns an array of shape (n, *batch_shape).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    params.validate()
    k = params.num_components
    batch_shape = params.pi.shape[:-1]
    pi = params.pi.data.reshape(-1, k)
    mu = params.mu.data.reshape(-1, k)
    tau = params.tau.data.reshape(-1, k)
    nu = params.nu.data.reshape(-1, k)
    b = pi.shape[0]

    cdf = np.cumsum(pi, axis=-1)
    cdf[:, -1] = 1.0  # guard against roundoff in the final bin
    u = rng.uniform(size=(n, b))
    comp = np.argmax(u[..., None] < cdf[None, :, :], axis=-1)

    rows = np.arange(b)
    mu_s = mu[rows, comp]
    tau_s = tau[rows, comp]
    nu_s = nu[rows, comp]

    normal = rng.normal((n, b))
    chi2 = rng.chisquare(nu_s)
    t = normal / np.sqrt(chi2 / nu_s)
    draws = mu_s + np.sqrt(tau_s) * t
    return draws.reshape((n,) + batch_shape)


def robust_loss(x, x_hat, alpha: float, delta: float) -> Tensor:
    """Barron robust penalty of the residual (x - x_hat)/delta.

    alpha selects the shape: 2 quadratic, 0 Cauchy, -inf Welsch, otherwise
    the general power form; alpha > 2 is rejected.
    """
    if alpha > 2.0:
        raise ValueError("alpha must be <= 2")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    r = (nk.as_tensor(x) - nk.as_tensor(x_hat)) * (1.0 / delta)
    half_r2 = r * r * 0.5
    if alpha == 2.0:
        return half_r2
    if alpha == 0.0:
        return nk.log1p(half_r2)
    if math.isinf(alpha):
        return 1.0 - nk.exp(-half_r2)
    b = abs(alpha - 2.0)
    core = nk.power(half_r2 * (2.0 / b) + 1.0, alpha / 2.0) - 1.0
    return core * (b / alpha)


def composite_loss(params: MixtureParams, targets, weights, cfg: LossConfig) -> Tensor:
    """Masked mean of lambda*NLL + (1-lambda)*robust(target, mixture mean)."""
    w = np.asarray(weights, dtype=np.float64)
    total = float(w.sum())
    if total == 0.0:
        raise ValueError("composite_loss: all timesteps are masked")
    lam = cfg.lambda_nll

    pieces = None
    if lam > 0.0:
        pieces = -mixture_log_prob(params, targets) * lam
    if lam < 1.0:
        rob = robust_loss(targets, mixture_mean(params), cfg.alpha, cfg.delta) * (1.0 - lam)
        pieces = rob if pieces is None else pieces + rob
    return nk.tsum(pieces * Tensor(w)) * (1.0 / total)
