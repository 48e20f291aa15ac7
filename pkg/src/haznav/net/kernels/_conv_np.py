"""Pure-numpy convolution kernels (im2col + BLAS matmul).

Reference backend; the compiled Cython core implements the identical
contract.  Layout is NHWC float64 C-contiguous throughout, weights are
(KH, KW, Cin, Cout).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _out_dim(size, k, s, p):
    return (size + 2 * p - k) // s + 1


def _pad(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2 * ph, w + 2 * pw, c), dtype=x.dtype)
    xp[:, ph : ph + h, pw : pw + w, :] = x
    return xp


def _im2col(xp, kh, kw, sh, sw, oh, ow):
    n = xp.shape[0]
    c = xp.shape[3]
    col = np.empty((n, oh, ow, kh, kw, c), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            col[:, :, :, i, j, :] = xp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :]
    return col.reshape(n * oh * ow, kh * kw * c)


def conv2d_forward(x, w, b, stride, pad):
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    sh, sw = stride
    ph, pw = pad
    oh, ow = _out_dim(h, kh, sh, ph), _out_dim(wd, kw, sw, pw)
    col = _im2col(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow)
    y = col @ w.reshape(kh * kw * cin, cout) + b
    return y.reshape(n, oh, ow, cout)


def conv2d_backward(x, w, dy, stride, pad):
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    sh, sw = stride
    ph, pw = pad
    oh, ow = _out_dim(h, kh, sh, ph), _out_dim(wd, kw, sw, pw)
    col = _im2col(_pad(x, ph, pw), kh, kw, sh, sw, oh, ow)
    dy_mat = dy.reshape(n * oh * ow, cout)
    dw = (col.T @ dy_mat).reshape(w.shape)
    db = dy_mat.sum(axis=0)
    dcol = (dy_mat @ w.reshape(kh * kw * cin, cout).T).reshape(n, oh, ow, kh, kw, cin)
    dxp = np.zeros((n, h + 2 * ph, wd + 2 * pw, cin), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + sh * oh : sh, j : j + sw * ow : sw, :] += dcol[:, :, :, i, j, :]
    dx = dxp[:, ph : ph + h, pw : pw + wd, :]
    return dx, dw, db
