"""Numpy implementation of the layer kernels, used when the extension is absent."""

import numpy as np

BACKEND = "numpy"


def _rows(W, ctx):
    B, K = ctx.shape
    return np.arange(B)[:, None], np.arange(K)[None, :]


def forward_layer(W, ctx, xin, lo, hi, bias_logit, s, xout):
    B, K, C, F = W.shape
    if ctx.shape != (B, K) or xin.shape != (B, F):
        raise ValueError("forward_layer: shape mismatch")
    if s.shape != (B, K) or xout.shape != (B, K + 1):
        raise ValueError("forward_layer: output shape mismatch")
    if ctx.size and (ctx.min() < 0 or ctx.max() >= C):
        raise IndexError("context id out of range")
    bi, ki = _rows(W, ctx)
    rows = W[bi, ki, ctx]
    np.einsum("bkf,bf->bk", rows, xin, out=s)
    xout[:, 0] = bias_logit
    np.clip(s, lo, hi, out=xout[:, 1:])


def update_layer(W, ctx, xin, s, target, lr, bound, loss):
    B, K = ctx.shape
    if target.shape != (B,) or lr.shape != (B, K):
        raise ValueError("update_layer: shape mismatch")
    x = target[:, None]
    signed = np.where(x > 0.5, -s, s)
    loss[...] = np.logaddexp(0.0, signed)
    g = np.exp(-np.logaddexp(0.0, -s)) - x
    step = lr * g
    bi, ki = _rows(W, ctx)
    rows = W[bi, ki, ctx]
    rows -= step[..., None] * xin[:, None, :]
    np.clip(rows, -bound, bound, out=rows)
    W[bi, ki, ctx] = rows
