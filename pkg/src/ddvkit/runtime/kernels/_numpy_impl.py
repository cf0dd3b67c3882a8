"""Pure-NumPy kernels (im2col / strided windows).

Fallback used when the compiled extension is unavailable.  Dot products
accumulate in float64 and results are stored as float32, matching the
compiled kernels to within rounding of the final cast.
"""

from __future__ import annotations

import numpy as np

F32 = np.float32
F64 = np.float64


def _out_hw(h, w, kh, kw, stride, padding):
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    return oh, ow


def _im2col(x, kh, kw, stride, padding):
    """[n, ci, h, w] -> windows [n, ci, kh, kw, oh, ow] (float64)."""
    n, ci, h, w = x.shape
    oh, ow = _out_hw(h, w, kh, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((n, ci, kh, kw, oh, ow), dtype=F64)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols


def conv2d_forward(x, w, b, stride, padding):
    cols = _im2col(x, w.shape[2], w.shape[3], stride, padding)
    # sum over (ci, kh, kw): -> [n, oh, ow, co]
    y = np.tensordot(cols, w.astype(F64), axes=([1, 2, 3], [1, 2, 3]))
    y = np.moveaxis(y, 3, 1) + b.astype(F64)[None, :, None, None]
    return np.ascontiguousarray(y, dtype=F32)


def conv2d_backward_input(gy, w, x_shape, stride, padding):
    n, ci, h, wd = x_shape
    co, _, kh, kw = w.shape
    oh, ow = gy.shape[2], gy.shape[3]
    # [n, oh, ow, ci, kh, kw]
    g = np.tensordot(gy.astype(F64), w.astype(F64), axes=([1], [0]))
    gxp = np.zeros((n, ci, h + 2 * padding, wd + 2 * padding), dtype=F64)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += np.moveaxis(
                g[:, :, :, :, i, j], 3, 1
            )
    gx = gxp[:, :, padding : padding + h, padding : padding + wd]
    return np.ascontiguousarray(gx, dtype=F32)


def conv2d_backward_weights(gy, x, w_shape, stride, padding):
    co, ci, kh, kw = w_shape
    cols = _im2col(x, kh, kw, stride, padding)
    # sum over (n, oh, ow): -> [co, ci, kh, kw]
    gw = np.tensordot(gy.astype(F64), cols, axes=([0, 2, 3], [0, 4, 5]))
    gb = gy.astype(F64).sum(axis=(0, 2, 3))
    return gw.astype(F32), gb.astype(F32)


def maxpool_forward(x, kernel, stride):
    n, c, h, w = x.shape
    oh, ow = _out_hw(h, w, kernel, kernel, stride, 0)
    s0, s1, s2, s3 = x.strides
    win = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, oh, ow, kernel, kernel),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
        writeable=False,
    )
    flat = win.reshape(n, c, oh, ow, kernel * kernel)
    local = flat.argmax(axis=4)
    y = np.take_along_axis(flat, local[..., None], axis=4)[..., 0]
    rows = (np.arange(oh) * stride)[None, None, :, None] + local // kernel
    cols = (np.arange(ow) * stride)[None, None, None, :] + local % kernel
    argmax = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(y, dtype=F32), np.ascontiguousarray(argmax)


def maxpool_backward(gy, argmax, x_shape, kernel, stride):
    n, c, h, w = x_shape
    gx = np.zeros((n, c, h * w), dtype=F64)
    nc_idx = np.repeat(np.arange(n)[:, None], c, axis=1)
    c_idx = np.repeat(np.arange(c)[None, :], n, axis=0)
    np.add.at(
        gx,
        (nc_idx[:, :, None], c_idx[:, :, None], argmax.reshape(n, c, -1)),
        gy.astype(F64).reshape(n, c, -1),
    )
    return gx.reshape(n, c, h, w).astype(F32)
