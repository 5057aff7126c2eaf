"""Adamax update-rule laws against an independent scalar oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleit.optim import Adamax, AdamaxState, adamax_step
from cleit.tensor import Rng, Tensor


def adamax_oracle(theta0, grad_fn, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Plain-Python scalar re-implementation used as the reference."""
    theta, m, u = float(theta0), 0.0, 0.0
    trace = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        u = max(beta2 * u, abs(g))
        theta = theta - (lr / (1 - beta1**t)) * m / (u + eps)
        trace.append(theta)
    return trace


def test_zero_gradient_leaves_params_and_advances_step():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st_ = AdamaxState.fresh(p.shape, p.dtype)
    before = p.data.copy()
    adamax_step(p, Tensor(np.zeros(2)), st_, lr=0.1)
    np.testing.assert_array_equal(p.data, before)
    assert st_.t == 1


def test_first_step_is_signed_learning_rate():
    rng = Rng(2)
    g = rng.normal(64)
    g[np.abs(g) < 1e-3] += 0.5  # keep |g| well above eps
    p = Tensor(np.zeros(64), requires_grad=True)
    st_ = AdamaxState.fresh(p.shape, p.dtype)
    adamax_step(p, Tensor(g), st_, lr=0.05)
    np.testing.assert_allclose(p.data, -0.05 * np.sign(g), atol=1e-6)


def test_three_steps_match_scalar_oracle():
    trace = adamax_oracle(1.0, lambda th: 2.0 * th, lr=0.1, steps=3)
    p = Tensor(np.array([1.0]), requires_grad=True)
    st_ = AdamaxState.fresh(p.shape, p.dtype)
    got = []
    for _ in range(3):
        adamax_step(p, Tensor(2.0 * p.data), st_, lr=0.1)
        got.append(float(p.data[0]))
    np.testing.assert_allclose(got, trace, atol=1e-12)


def test_u_stays_nonnegative_and_above_decayed_floor():
    rng = Rng(5)
    p = Tensor(np.zeros(16), requires_grad=True)
    st_ = AdamaxState.fresh(p.shape, p.dtype)
    prev_u = st_.u.copy()
    for _ in range(20):
        adamax_step(p, Tensor(rng.normal(16)), st_, lr=0.01)
        assert (st_.u >= 0).all()
        assert (st_.u >= st_.beta2 * prev_u - 1e-15).all()
        prev_u = st_.u.copy()


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    lr=st.floats(1e-5, 1.0),
    scale=st.floats(1e-6, 1e3),
)
def test_finite_params_for_finite_inputs(seed, lr, scale):
    rng = Rng(seed)
    p = Tensor(rng.normal(8), requires_grad=True)
    st_ = AdamaxState.fresh(p.shape, p.dtype)
    for _ in range(5):
        adamax_step(p, Tensor(rng.normal(8) * scale), st_, lr=lr)
    assert np.isfinite(p.data).all()


def test_optimizer_group_skips_gradless_params():
    a = Tensor(np.ones(3), requires_grad=True)
    b = Tensor(np.ones(3), requires_grad=True)
    opt = Adamax([a, b], lr=0.1)
    a.accumulate_grad(np.ones(3))
    opt.step()
    assert not np.array_equal(a.data, np.ones(3))
    np.testing.assert_array_equal(b.data, np.ones(3))


def test_lr_must_be_positive():
    p = Tensor(np.ones(1), requires_grad=True)
    with pytest.raises(ValueError):
        adamax_step(p, Tensor(np.ones(1)), AdamaxState.fresh((1,), np.float64), lr=0.0)
