"""NumPy reference implementations of the hot elementwise kernels.

These are the semantic ground truth: the compiled core in ``_core.pyx``
must agree with them to floating-point roundoff. They are also the
fallback used when the extension is not built.
"""

import numpy as np

# SELU constants (Klambauer et al. self-normalizing defaults).
SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805


def selu_fwd(x: np.ndarray) -> np.ndarray:
    neg = SELU_SCALE * SELU_ALPHA * np.expm1(np.minimum(x, 0.0))
    return np.where(x > 0.0, SELU_SCALE * x, neg)


def selu_bwd(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # d/dx on the negative branch is scale*alpha*e^x.
    neg = SELU_SCALE * SELU_ALPHA * np.exp(np.minimum(x, 0.0))
    return grad_out * np.where(x > 0.0, SELU_SCALE, neg)


def sigmoid_fwd(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * y * (1.0 - y)


def adamax_update(
    theta: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    u: np.ndarray,
    step_size: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One in-place Adamax update; ``step_size`` is lr with the first-moment
    bias correction already folded in."""
    m *= beta1
    m += (1.0 - beta1) * grad
    np.maximum(beta2 * u, np.abs(grad), out=u)
    theta -= step_size * m / (u + eps)
