"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a NumPy array (0-, 1- or 2-D, float32 or float64) and
optionally records the operation that produced it. Calling ``backward()``
on a scalar result walks the recorded graph in reverse topological order
and accumulates gradients into every tensor that requires them.

Conventions:

* tensors are never mutated by operations; parameter updates happen
  outside the graph via the optimizer,
* every operation output is checked for NaN/Inf and raises
  ``NumericsError`` instead of propagating silently,
* broadcasting is deliberately narrow: only row-wise bias addition and
  the explicit ``scale_rows`` / ``scale_cols`` helpers. Everything else
  requires exact shape agreement.
"""

from __future__ import annotations

import hashlib
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NumericsError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (eval-mode forwards)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(data: np.ndarray, ctx: str) -> None:
    if not np.isfinite(data).all():
        raise NumericsError(f"non-finite values produced by {ctx}")


class Tensor:
    """Array value plus optional gradient accumulator and tape node."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are at most 2-D, got shape {arr.shape}")
        _check_finite(arr, name or "tensor constructor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.item())

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # -- gradient machinery --------------------------------------------

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def make_op(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], None],
    ctx: str,
) -> Tensor:
    """Wrap an op result, registering the backward closure on the tape.

    When gradients are globally disabled or no parent requires them, the
    result is a plain leaf and ``backward`` is dropped.
    """
    _check_finite(data, ctx)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _as_const(x) -> float:
    if isinstance(x, Tensor):
        raise TypeError("expected a python scalar")
    return float(x)


# -- arithmetic ---------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = _as_const(b)
        out = make_op(a.data + c, (a,), lambda g: a.accumulate_grad(g), "add")
        return out
    if a.shape != b.shape:
        raise DimensionError(f"add shapes {a.shape} vs {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return make_op(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -_as_const(b))
    if a.shape != b.shape:
        raise DimensionError(f"sub shapes {a.shape} vs {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return make_op(a.data - b.data, (a, b), bwd, "sub")


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = _as_const(b)
        return make_op(a.data * c, (a,), lambda g: a.accumulate_grad(g * c), "mul")
    if a.shape != b.shape:
        raise DimensionError(f"mul shapes {a.shape} vs {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return make_op(a.data * b.data, (a, b), bwd, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} vs {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return make_op(a.data @ b.data, (a, b), bwd, "matmul")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-wise bias: x[n, d] + b[d]. The only implicit broadcast."""
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise DimensionError(f"add_bias shapes {x.shape} vs {b.shape}")

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return make_op(x.data + b.data[None, :], (x, b), bwd, "add_bias")


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b with b broadcast over rows."""
    return add_bias(matmul(x, w), b)


def scale_rows(x: Tensor, v: Tensor) -> Tensor:
    """Multiply row i of x[n, d] by v[i]; v may also scale a 1-D x elementwise."""
    if v.data.ndim != 1 or x.shape[0] != v.shape[0]:
        raise DimensionError(f"scale_rows shapes {x.shape} vs {v.shape}")
    vexp = v.data if x.data.ndim == 1 else v.data[:, None]

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * vexp)
        if v.requires_grad:
            gv = g * x.data
            v.accumulate_grad(gv if gv.ndim == 1 else gv.sum(axis=1))

    return make_op(x.data * vexp, (x, v), bwd, "scale_rows")


def scale_cols(x: Tensor, v: Tensor) -> Tensor:
    """Multiply column j of x[n, d] by v[j]."""
    if x.data.ndim != 2 or v.data.ndim != 1 or x.shape[1] != v.shape[0]:
        raise DimensionError(f"scale_cols shapes {x.shape} vs {v.shape}")

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * v.data[None, :])
        if v.requires_grad:
            v.accumulate_grad((g * x.data).sum(axis=0))

    return make_op(x.data * v.data[None, :], (x, v), bwd, "scale_cols")


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError("transpose expects a 2-D tensor")
    return make_op(
        x.data.T.copy(),
        (x,),
        lambda g: x.accumulate_grad(g.T) if x.requires_grad else None,
        "transpose",
    )


# -- elementwise --------------------------------------------------------


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def bwd(g):
        x.accumulate_grad(g * out_data)

    return make_op(out_data, (x,), bwd, "exp")


def log(x: Tensor) -> Tensor:
    def bwd(g):
        x.accumulate_grad(g / x.data)

    return make_op(np.log(x.data), (x,), bwd, "log")


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)

    def bwd(g):
        x.accumulate_grad(g * 0.5 / out_data)

    return make_op(out_data, (x,), bwd, "sqrt")


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def bwd(g):
        x.accumulate_grad(g * (1.0 - out_data * out_data))

    return make_op(out_data, (x,), bwd, "tanh")


def square(x: Tensor) -> Tensor:
    def bwd(g):
        x.accumulate_grad(g * 2.0 * x.data)

    return make_op(x.data * x.data, (x,), bwd, "square")


# -- reductions and reshaping -------------------------------------------


def sum_all(x: Tensor) -> Tensor:
    def bwd(g):
        x.accumulate_grad(np.full_like(x.data, float(g)))

    return make_op(np.asarray(x.data.sum()), (x,), bwd, "sum_all")


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size

    def bwd(g):
        x.accumulate_grad(np.full_like(x.data, float(g) / n))

    return make_op(np.asarray(x.data.mean()), (x,), bwd, "mean_all")


def row_sum(x: Tensor) -> Tensor:
    """Sum over columns: x[n, d] -> [n]."""
    if x.data.ndim != 2:
        raise DimensionError("row_sum expects a 2-D tensor")

    def bwd(g):
        x.accumulate_grad(np.broadcast_to(g[:, None], x.shape).copy())

    return make_op(x.data.sum(axis=1), (x,), bwd, "row_sum")


def col_sum(x: Tensor) -> Tensor:
    """Sum over rows: x[n, d] -> [d]."""
    if x.data.ndim != 2:
        raise DimensionError("col_sum expects a 2-D tensor")

    def bwd(g):
        x.accumulate_grad(np.broadcast_to(g[None, :], x.shape).copy())

    return make_op(x.data.sum(axis=0), (x,), bwd, "col_sum")


def ravel(x: Tensor) -> Tensor:
    """Flatten to 1-D."""
    shape = x.shape

    def bwd(g):
        x.accumulate_grad(g.reshape(shape))

    return make_op(x.data.reshape(-1).copy(), (x,), bwd, "ravel")


def diag(x: Tensor) -> Tensor:
    """Main diagonal of a square matrix."""
    if x.data.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"diag expects a square matrix, got {x.shape}")

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.fill_diagonal(gx, g)
        x.accumulate_grad(gx)

    return make_op(np.diagonal(x.data).copy(), (x,), bwd, "diag")


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate [n, k_i] tensors along columns."""
    parts = list(parts)
    if not parts or any(p.data.ndim != 2 for p in parts):
        raise DimensionError("concat_cols expects 2-D tensors")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate_grad(g[:, lo:hi])

    return make_op(np.concatenate([p.data for p in parts], axis=1), parts, bwd, "concat_cols")


def row_normalize(x: Tensor, min_norm: float = 1e-12) -> Tensor:
    """Scale each row of x[n, d] to unit Euclidean norm."""
    if x.data.ndim != 2:
        raise DimensionError("row_normalize expects a 2-D tensor")
    norms = np.linalg.norm(x.data, axis=1)
    if (norms <= min_norm).any():
        raise NumericsError("row_normalize: zero-norm row")
    u = x.data / norms[:, None]

    def bwd(g):
        # d(x/|x|) = (g - u (u.g)) / |x| per row
        proj = (u * g).sum(axis=1, keepdims=True)
        x.accumulate_grad((g - u * proj) / norms[:, None])

    return make_op(u, (x,), bwd, "row_normalize")


def pairwise_sqdist(x: Tensor, y: Tensor) -> Tensor:
    """All-pairs squared Euclidean distances: x[n, d], y[m, d] -> [n, m]."""
    if x.data.ndim != 2 or y.data.ndim != 2 or x.shape[1] != y.shape[1]:
        raise DimensionError(f"pairwise_sqdist shapes {x.shape} vs {y.shape}")
    xn = (x.data * x.data).sum(axis=1)
    yn = (y.data * y.data).sum(axis=1)
    d = xn[:, None] + yn[None, :] - 2.0 * (x.data @ y.data.T)
    np.maximum(d, 0.0, out=d)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(2.0 * (x.data * g.sum(axis=1)[:, None] - g @ y.data))
        if y.requires_grad:
            y.accumulate_grad(2.0 * (y.data * g.sum(axis=0)[:, None] - g.T @ x.data))

    return make_op(d, (x, y), bwd, "pairwise_sqdist")


# -- seeded randomness ---------------------------------------------------


def _tag_entropy(tag) -> int:
    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Deterministic random stream (PCG64 under the hood).

    The same seed and the same call sequence always produce the same
    values; draws are generated in float64 and cast afterwards so the
    stream does not depend on the requested dtype.
    """

    def __init__(self, seed: int, _spawn: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._spawn = _spawn
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *_spawn]))
        )

    def derive(self, *tags) -> "Rng":
        """Independent child stream, deterministic in (seed, tags)."""
        return Rng(self.seed, self._spawn + tuple(_tag_entropy(t) for t in tags))

    def normal(self, shape, dtype=np.float64) -> np.ndarray:
        return self._gen.standard_normal(shape).astype(dtype, copy=False)

    def uniform(self, shape, dtype=np.float64) -> np.ndarray:
        return self._gen.random(shape).astype(dtype, copy=False)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


# -- verification harness -------------------------------------------------


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must be a deterministic scalar-valued function; any internal
    randomness has to be frozen (fixed seed or injected noise) so repeated
    evaluations see the same values. The error at coordinate i is
    |analytic_i - numeric_i| / max(1, |analytic_i|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    probe = Tensor(x.data.astype(np.float64).copy(), requires_grad=True)
    out = f(probe)
    if out.data.size != 1:
        raise DimensionError("grad_check requires a scalar-valued function")
    _check_finite(out.data, "grad_check objective")
    out.backward()
    analytic = (
        probe.grad.copy() if probe.grad is not None else np.zeros_like(probe.data)
    )

    numeric = np.zeros_like(analytic)
    flat = probe.data.ravel()
    nflat = numeric.ravel()
    for i in range(flat.size):
        orig = flat[i]
        pert = probe.data.copy()
        pert.ravel()[i] = orig + eps
        with no_grad():
            hi = float(f(Tensor(pert)).data)
        pert.ravel()[i] = orig - eps
        with no_grad():
            lo = float(f(Tensor(pert)).data)
        nflat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))
