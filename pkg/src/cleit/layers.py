"""Neural building blocks: activations, layer normalization, dropout and
the stochastic Gaussian encoder head.

All operations are differentiable tape ops over :class:`~cleit.tensor.Tensor`
and are validated by finite-difference gradient checks in the test suite.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError
from .tensor import Rng, Tensor, add, affine, exp, make_op, mul

LOGVAR_CLAMP = 10.0  # |log variance| bound before exponentiation


def selu(x: Tensor) -> Tensor:
    """Self-normalizing ELU: scale * x on the positive branch,
    scale * alpha * (e^x - 1) on the negative one."""
    out_data = kernels.selu_fwd(x.data)

    def bwd(g):
        x.accumulate_grad(kernels.selu_bwd(x.data, g))

    return make_op(out_data, (x,), bwd, "selu")


def sigmoid(x: Tensor) -> Tensor:
    out_data = kernels.sigmoid_fwd(x.data)

    def bwd(g):
        x.accumulate_grad(kernels.sigmoid_bwd(out_data, g))

    return make_op(out_data, (x,), bwd, "sigmoid")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization (population variance) followed by an
    elementwise affine transform with gain ``gamma`` and bias ``beta``."""
    if eps <= 0:
        raise ConfigError("layer_norm eps must be positive")
    if x.data.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError(
            f"layer_norm shapes x={x.shape} gamma={gamma.shape} beta={beta.shape}"
        )
    mean = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * rstd

    def bwd(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data[None, :]
            mean_g = gx.mean(axis=1, keepdims=True)
            mean_gx = (gx * xhat).mean(axis=1, keepdims=True)
            x.accumulate_grad((gx - mean_g - xhat * mean_gx) * rstd)

    return make_op(xhat * gamma.data[None, :] + beta.data[None, :], (x, gamma, beta), bwd, "layer_norm")


def dropout(x: Tensor, p: float, mode: str, rng: Rng | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Eval mode is an exact identity for every p.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if mode != "train":
        raise ConfigError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ConfigError("dropout in train mode needs an rng")
    mask = (rng.uniform(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def bwd(g):
        x.accumulate_grad(g * mask)

    return make_op(x.data * mask, (x,), bwd, "dropout")


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient is passed through strictly inside the range."""
    inside = (x.data > lo) & (x.data < hi)

    def bwd(g):
        x.accumulate_grad(g * inside)

    return make_op(np.clip(x.data, lo, hi), (x,), bwd, "clamp")


def reparameterize(mu: Tensor, logvar: Tensor, rng: Rng | None = None, noise: np.ndarray | None = None) -> Tensor:
    """z = mu + exp(logvar / 2) * eta with eta ~ N(0, I).

    Gradient flows to mu and logvar only; ``noise`` overrides the draw for
    deterministic tests.
    """
    if mu.shape != logvar.shape:
        raise DimensionError(f"reparameterize shapes {mu.shape} vs {logvar.shape}")
    if noise is None:
        if rng is None:
            raise ConfigError("reparameterize needs an rng or explicit noise")
        noise = rng.normal(mu.shape, dtype=mu.dtype)
    eta = Tensor(np.asarray(noise, dtype=mu.dtype))
    return add(mu, mul(exp(mul(logvar, 0.5)), eta))


def lecun_normal(rng: Rng, d_in: int, d_out: int, dtype) -> np.ndarray:
    """Fan-in scaled Gaussian init, matching SELU's self-normalizing regime."""
    return (rng.normal((d_in, d_out)) / np.sqrt(d_in)).astype(dtype)


class DenseBlock:
    """Affine layer with optional SELU/sigmoid activation, layer norm and
    dropout, applied in that order."""

    def __init__(
        self,
        d_in: int,
        d_out: int,
        rng: Rng,
        activation: str = "selu",
        has_layer_norm: bool = False,
        dropout_p: float = 0.0,
        name: str = "dense",
        dtype=np.float32,
        ln_eps: float = 1e-5,
    ):
        if d_in <= 0 or d_out <= 0:
            raise ConfigError(f"block widths must be positive, got {d_in}x{d_out}")
        if activation not in ("selu", "linear", "sigmoid", "tanh"):
            raise ConfigError(f"unknown activation {activation!r}")
        if not 0.0 <= dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {dropout_p}")
        self.d_in = d_in
        self.d_out = d_out
        self.activation = activation
        self.has_layer_norm = has_layer_norm
        self.dropout_p = dropout_p
        self.name = name
        self.ln_eps = ln_eps
        self.W = Tensor(lecun_normal(rng, d_in, d_out, dtype), requires_grad=True, name=f"{name}.W")
        self.b = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True, name=f"{name}.b")
        if has_layer_norm:
            self.gamma = Tensor(np.ones(d_out, dtype=dtype), requires_grad=True, name=f"{name}.gamma")
            self.beta = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True, name=f"{name}.beta")

    def parameters(self) -> list[Tensor]:
        ps = [self.W, self.b]
        if self.has_layer_norm:
            ps += [self.gamma, self.beta]
        return ps

    def forward(self, x: Tensor, mode: str = "train", rng: Rng | None = None) -> Tensor:
        h = affine(x, self.W, self.b)
        if self.activation == "selu":
            h = selu(h)
        elif self.activation == "sigmoid":
            h = sigmoid(h)
        elif self.activation == "tanh":
            from .tensor import tanh as _tanh

            h = _tanh(h)
        if self.has_layer_norm:
            h = layer_norm(h, self.gamma, self.beta, self.ln_eps)
        if self.dropout_p > 0.0 and mode == "train":
            h = dropout(h, self.dropout_p, mode, rng)
        return h


class GaussianHead:
    """Maps a hidden vector to the mean and log-variance of a diagonal
    Gaussian over the latent code; log-variances are clamped before use."""

    def __init__(self, d_in: int, z_dim: int, rng: Rng, name: str = "gauss", dtype=np.float32):
        if d_in <= 0 or z_dim <= 0:
            raise ConfigError("GaussianHead widths must be positive")
        self.d_in = d_in
        self.z_dim = z_dim
        self.name = name
        self.W_mu = Tensor(lecun_normal(rng, d_in, z_dim, dtype), requires_grad=True, name=f"{name}.W_mu")
        self.b_mu = Tensor(np.zeros(z_dim, dtype=dtype), requires_grad=True, name=f"{name}.b_mu")
        self.W_logvar = Tensor(
            lecun_normal(rng, d_in, z_dim, dtype), requires_grad=True, name=f"{name}.W_logvar"
        )
        self.b_logvar = Tensor(np.zeros(z_dim, dtype=dtype), requires_grad=True, name=f"{name}.b_logvar")

    def parameters(self) -> list[Tensor]:
        return [self.W_mu, self.b_mu, self.W_logvar, self.b_logvar]

    def forward(self, h: Tensor) -> tuple[Tensor, Tensor]:
        mu = affine(h, self.W_mu, self.b_mu)
        logvar = clamp(affine(h, self.W_logvar, self.b_logvar), -LOGVAR_CLAMP, LOGVAR_CLAMP)
        return mu, logvar
