"""Core tensor arithmetic, the autodiff tape, and the gradient checker."""

import numpy as np
import pytest

from cleit.errors import DimensionError, NumericsError
from cleit.layers import layer_norm, selu
from cleit.losses import LabelBatch, si_mse
from cleit.tensor import (
    Rng,
    Tensor,
    add,
    add_bias,
    affine,
    col_sum,
    concat_cols,
    diag,
    exp,
    grad_check,
    log,
    matmul,
    mean_all,
    mul,
    no_grad,
    pairwise_sqdist,
    row_normalize,
    row_sum,
    scale_cols,
    scale_rows,
    sqrt,
    square,
    sub,
    sum_all,
    tanh,
    transpose,
)


def matmul_oracle(a, b):
    """Brute-force triple-loop matrix multiply."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


class TestAffine:
    def test_identity_weights(self):
        rng = Rng(0)
        x = Tensor(rng.normal((5, 3)))
        w = Tensor(np.eye(3))
        b = Tensor(np.zeros(3))
        np.testing.assert_array_equal(affine(x, w, b).data, x.data)

    def test_scalar_case(self):
        y = affine(Tensor([[2.0]]), Tensor([[3.0]]), Tensor([1.0]))
        assert y.item() == 7.0

    def test_matches_triple_loop_oracle(self):
        rng = Rng(7)
        x, w, b = rng.normal((4, 3)), rng.normal((3, 2)), rng.normal(2)
        got = affine(Tensor(x), Tensor(w), Tensor(b)).data
        want = matmul_oracle(x, w) + b[None, :]
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            affine(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), Tensor(np.ones(2)))


class TestGradCheck:
    def test_quadratic_exact(self):
        # central differences are exact for quadratics
        rng = Rng(1)
        x = Tensor(rng.normal(6))
        assert grad_check(lambda t: sum_all(square(t)), x, eps=1e-5) < 1e-6

    def test_constant_function(self):
        x = Tensor(np.ones(4))
        assert grad_check(lambda t: Tensor(np.asarray(3.0)), x) == 0.0

    def test_composed_chain(self):
        # affine -> SELU -> layer norm -> masked si-MSE on a random 2x4 input
        rng = Rng(3)
        w = Tensor(rng.normal((4, 3)))
        b = Tensor(rng.normal(3))
        gamma = Tensor(rng.normal(3) * 0.1 + 1.0)
        beta = Tensor(rng.normal(3) * 0.1)
        batch = LabelBatch(
            y=rng.uniform((2, 3)), mask=np.array([[1, 0, 1], [1, 1, 1]], dtype=float)
        )

        def f(x):
            h = layer_norm(selu(affine(x, w, b)), gamma, beta)
            return si_mse(batch, h)

        x = Tensor(rng.normal((2, 4)))
        assert grad_check(f, x, eps=1e-5) < 1e-4

    def test_rejects_vector_objective(self):
        with pytest.raises(DimensionError):
            grad_check(lambda t: t, Tensor(np.ones(3)))


@pytest.mark.parametrize(
    "name,builder",
    [
        ("add", lambda a, b: add(a, b)),
        ("sub", lambda a, b: sub(a, b)),
        ("mul", lambda a, b: mul(a, b)),
        ("matmul", lambda a, b: matmul(a, transpose(b))),
    ],
)
def test_binary_op_gradients(name, builder):
    rng = Rng(11)
    a_data = rng.normal((3, 4))
    b_data = rng.normal((3, 4))

    err_a = grad_check(lambda t: sum_all(square(builder(t, Tensor(b_data)))), Tensor(a_data))
    err_b = grad_check(lambda t: sum_all(square(builder(Tensor(a_data), t))), Tensor(b_data))
    assert err_a < 1e-6, name
    assert err_b < 1e-6, name


@pytest.mark.parametrize(
    "name,f",
    [
        ("exp", lambda t: sum_all(exp(t))),
        ("log", lambda t: sum_all(log(add(square(t), 0.5)))),
        ("sqrt", lambda t: sum_all(sqrt(add(square(t), 0.5)))),
        ("tanh", lambda t: sum_all(square(tanh(t)))),
        ("mean", lambda t: mean_all(square(t))),
        ("row_sum", lambda t: sum_all(square(row_sum(t)))),
        ("col_sum", lambda t: sum_all(square(col_sum(t)))),
        ("transpose", lambda t: sum_all(square(transpose(t)))),
        ("row_normalize", lambda t: sum_all(square(row_normalize(t)))),
        ("scalar_mul", lambda t: mul(sum_all(t), -2.5)),
        ("scalar_add", lambda t: sum_all(square(add(t, 1.5)))),
    ],
)
def test_unary_op_gradients(name, f):
    rng = Rng(13)
    x = Tensor(rng.normal((3, 4)) + 0.1)
    assert grad_check(f, x) < 1e-5, name


def test_structured_op_gradients():
    rng = Rng(17)
    x = Tensor(rng.normal((4, 4)))
    v = Tensor(rng.normal(4))
    y = Tensor(rng.normal((3, 4)))

    assert grad_check(lambda t: sum_all(square(diag(t))), x) < 1e-6
    assert grad_check(lambda t: sum_all(square(add_bias(t, v))), x) < 1e-6
    assert grad_check(lambda t: sum_all(square(add_bias(x, t))), v) < 1e-6
    assert grad_check(lambda t: sum_all(square(scale_rows(t, v))), x) < 1e-6
    assert grad_check(lambda t: sum_all(square(scale_rows(x, t))), v) < 1e-6
    assert grad_check(lambda t: sum_all(square(scale_cols(t, v))), x) < 1e-6
    assert grad_check(lambda t: sum_all(square(scale_cols(x, t))), v) < 1e-6
    assert (
        grad_check(lambda t: sum_all(square(pairwise_sqdist(t, Tensor(y.data)))), x) < 1e-5
    )
    assert (
        grad_check(lambda t: sum_all(square(pairwise_sqdist(Tensor(x.data), t))), y) < 1e-5
    )
    other = Tensor(rng.normal((4, 2)))
    assert grad_check(lambda t: sum_all(square(concat_cols([t, other]))), x) < 1e-6


def test_grad_accumulates_through_shared_node():
    # x used twice: d/dx of x*x summed is 2x
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    sum_all(mul(x, x)).backward()
    np.testing.assert_allclose(x.grad, 2 * x.data, rtol=1e-14)


def test_no_grad_suppresses_graph():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with no_grad():
        y = sum_all(square(x))
    assert not y.requires_grad and y._backward is None


class TestInvariants:
    def test_determinism_same_seed(self):
        def run():
            rng = Rng(99)
            a = Tensor(rng.normal((8, 8)))
            b = Tensor(rng.normal((8, 8)))
            return matmul(selu(a), b).data

        np.testing.assert_array_equal(run(), run())

    def test_rng_derive_streams_are_stable_and_distinct(self):
        base = Rng(5)
        a1 = base.derive("init").normal(4)
        a2 = Rng(5).derive("init").normal(4)
        b = Rng(5).derive("shuffle").normal(4)
        np.testing.assert_array_equal(a1, a2)
        assert not np.array_equal(a1, b)

    def test_nonfinite_input_rejected(self):
        with pytest.raises(NumericsError):
            Tensor(np.array([1.0, np.inf]))

    def test_nonfinite_op_result_rejected(self):
        x = Tensor(np.array([[1e300]]))
        with np.errstate(over="ignore"), pytest.raises(NumericsError):
            matmul(x, x)

    def test_three_d_rejected(self):
        with pytest.raises(DimensionError):
            Tensor(np.zeros((2, 2, 2)))

    def test_zero_norm_row_rejected(self):
        with pytest.raises(NumericsError):
            row_normalize(Tensor(np.array([[1.0, 0.0], [0.0, 0.0]])))
