"""Adamax optimizer (infinity-norm Adam variant).

Update rule per step t (1-based):

    m <- beta1 * m + (1 - beta1) * g
    u <- max(beta2 * u, |g|)
    theta <- theta - lr / (1 - beta1^t) * m / (u + eps)

The bias correction uses the post-increment step counter, so the very
first update reduces to -lr * sign(g) up to eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, NumericsError
from .tensor import Tensor

EPS_NUM = 1e-8


@dataclass
class AdamaxState:
    """Per-parameter moment buffers and step counter."""

    m: np.ndarray
    u: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = EPS_NUM

    @classmethod
    def fresh(cls, shape, dtype, beta1: float = 0.9, beta2: float = 0.999) -> "AdamaxState":
        return cls(m=np.zeros(shape, dtype=dtype), u=np.zeros(shape, dtype=dtype), beta1=beta1, beta2=beta2)


def adamax_step(params: Tensor, grads: Tensor, state: AdamaxState, lr: float) -> Tensor:
    """Apply one Adamax update in place on ``params.data``; returns ``params``."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError("params/grads/state shapes disagree")
    if not np.isfinite(grads.data).all():
        raise NumericsError("adamax_step received non-finite gradients")
    state.t += 1
    step_size = lr / (1.0 - state.beta1**state.t)
    kernels.adamax_update(
        params.data, grads.data, state.m, state.u, step_size, state.beta1, state.beta2, state.eps
    )
    if not np.isfinite(params.data).all():
        raise NumericsError("adamax_step produced non-finite parameters")
    return params


class Adamax:
    """Convenience wrapper driving ``adamax_step`` over a parameter group."""

    def __init__(
        self,
        params: list[Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
    ):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.params = list(params)
        self.lr = lr
        self._states = [
            AdamaxState.fresh(p.shape, p.dtype, beta1=beta1, beta2=beta2) for p in self.params
        ]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for p, st in zip(self.params, self._states):
            if p.grad is None:
                st.t += 1  # keep counters aligned across the group
                continue
            adamax_step(p, Tensor(p.grad), st, self.lr)
