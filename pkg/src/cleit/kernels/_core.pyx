# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot elementwise kernels.

Must agree with ``cleit.kernels.reference`` to roundoff; the parity test
and the benchmark in ``benchmarks/bench_kernels.py`` compare the two.
"""

import numpy as np

from libc.math cimport exp as c_exp, expm1 as c_expm1, fabs

ctypedef fused real:
    float
    double

cdef double SELU_ALPHA = 1.6732632423543772
cdef double SELU_SCALE = 1.0507009873554805


def _selu_fwd_flat(real[::1] x, real[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    with nogil:
        for i in range(n):
            if x[i] > 0:
                out[i] = <real> (SELU_SCALE * x[i])
            else:
                out[i] = <real> (SELU_SCALE * SELU_ALPHA * c_expm1(x[i]))


def _selu_bwd_flat(real[::1] x, real[::1] grad_out, real[::1] grad_in):
    cdef Py_ssize_t i, n = x.shape[0]
    with nogil:
        for i in range(n):
            if x[i] > 0:
                grad_in[i] = <real> (grad_out[i] * SELU_SCALE)
            else:
                grad_in[i] = <real> (grad_out[i] * SELU_SCALE * SELU_ALPHA * c_exp(x[i]))


def _sigmoid_fwd_flat(real[::1] x, real[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double e
    with nogil:
        for i in range(n):
            if x[i] >= 0:
                out[i] = <real> (1.0 / (1.0 + c_exp(-x[i])))
            else:
                e = c_exp(x[i])
                out[i] = <real> (e / (1.0 + e))


def _sigmoid_bwd_flat(real[::1] y, real[::1] grad_out, real[::1] grad_in):
    cdef Py_ssize_t i, n = y.shape[0]
    with nogil:
        for i in range(n):
            grad_in[i] = <real> (grad_out[i] * y[i] * (1.0 - y[i]))


def _adamax_flat(
    real[::1] theta,
    real[::1] grad,
    real[::1] m,
    real[::1] u,
    double step_size,
    double beta1,
    double beta2,
    double eps,
):
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef double decayed
    with nogil:
        for i in range(n):
            m[i] = <real> (beta1 * m[i] + (1.0 - beta1) * grad[i])
            decayed = beta2 * u[i]
            u[i] = <real> (decayed if decayed > fabs(grad[i]) else fabs(grad[i]))
            theta[i] = <real> (theta[i] - step_size * m[i] / (u[i] + eps))


def selu_fwd(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _selu_fwd_flat(x.ravel(), out.ravel())
    return out


def selu_bwd(x, grad_out):
    x = np.ascontiguousarray(x)
    grad_out = np.ascontiguousarray(grad_out)
    grad_in = np.empty_like(x)
    _selu_bwd_flat(x.ravel(), grad_out.ravel(), grad_in.ravel())
    return grad_in


def sigmoid_fwd(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _sigmoid_fwd_flat(x.ravel(), out.ravel())
    return out


def sigmoid_bwd(y, grad_out):
    y = np.ascontiguousarray(y)
    grad_out = np.ascontiguousarray(grad_out)
    grad_in = np.empty_like(y)
    _sigmoid_bwd_flat(y.ravel(), grad_out.ravel(), grad_in.ravel())
    return grad_in


def adamax_update(theta, grad, m, u, step_size, beta1, beta2, eps):
    grad = np.ascontiguousarray(grad)
    _adamax_flat(
        theta.ravel(), grad.ravel(), m.ravel(), u.ravel(), step_size, beta1, beta2, eps
    )
