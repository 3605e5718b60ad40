# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward/update kernels for a batch of same-shaped gated layers.

Shapes: W (B, K, C, F), ctx (B, K), xin (B, F), s (B, K), xout (B, K + 1).
"""

from libc.math cimport exp, log1p

BACKEND = "cython"


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def forward_layer(const double[:, :, :, ::1] W, const long long[:, ::1] ctx,
                  const double[:, ::1] xin, double lo, double hi, double bias_logit,
                  double[:, ::1] s, double[:, ::1] xout):
    cdef Py_ssize_t B = W.shape[0], K = W.shape[1], C = W.shape[2], F = W.shape[3]
    cdef Py_ssize_t b, k, f
    cdef long long c
    cdef double acc, v
    if ctx.shape[0] != B or ctx.shape[1] != K or xin.shape[0] != B or xin.shape[1] != F:
        raise ValueError("forward_layer: shape mismatch")
    if s.shape[0] != B or s.shape[1] != K or xout.shape[0] != B or xout.shape[1] != K + 1:
        raise ValueError("forward_layer: output shape mismatch")
    for b in range(B):
        for k in range(K):
            if ctx[b, k] < 0 or ctx[b, k] >= C:
                raise IndexError("context id out of range")
    with nogil:
        for b in range(B):
            xout[b, 0] = bias_logit
            for k in range(K):
                c = ctx[b, k]
                acc = 0.0
                for f in range(F):
                    acc = acc + W[b, k, c, f] * xin[b, f]
                s[b, k] = acc
                v = acc
                if v < lo:
                    v = lo
                elif v > hi:
                    v = hi
                xout[b, k + 1] = v


def update_layer(double[:, :, :, ::1] W, const long long[:, ::1] ctx,
                 const double[:, ::1] xin, const double[:, ::1] s,
                 const double[::1] target, const double[:, :] lr, double bound,
                 double[:, ::1] loss):
    cdef Py_ssize_t B = W.shape[0], K = W.shape[1], F = W.shape[3]
    cdef Py_ssize_t b, k, f
    cdef long long c
    cdef double g, step, v, x
    if target.shape[0] != B or lr.shape[0] != B or lr.shape[1] != K:
        raise ValueError("update_layer: shape mismatch")
    with nogil:
        for b in range(B):
            x = target[b]
            for k in range(K):
                c = ctx[b, k]
                if x > 0.5:
                    loss[b, k] = _softplus(-s[b, k])
                else:
                    loss[b, k] = _softplus(s[b, k])
                g = _sigmoid(s[b, k]) - x
                step = lr[b, k] * g
                if step == 0.0:
                    continue
                for f in range(F):
                    v = W[b, k, c, f] - step * xin[b, f]
                    if v < -bound:
                        v = -bound
                    elif v > bound:
                        v = bound
                    W[b, k, c, f] = v
