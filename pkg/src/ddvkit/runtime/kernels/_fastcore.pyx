# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the convolution/pooling hot loops.

Float32 storage with float64 accumulators, matching the NumPy fallback.
The convolutions run on a pre-padded copy of the input so the inner loops
are branch-free and contiguous over the fastest axis, which lets the C
compiler vectorize them.  Single-threaded on purpose: results must be
reproducible run to run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

F32 = np.float32
F64 = np.float64


def _padded(x_arr, int padding):
    if padding == 0:
        return np.ascontiguousarray(x_arr, dtype=F32)
    return np.pad(
        np.ascontiguousarray(x_arr, dtype=F32),
        ((0, 0), (0, 0), (padding, padding), (padding, padding)),
    )


def conv2d_forward(x_arr, w_arr, b_arr, int stride, int padding):
    xp_arr = _padded(x_arr, padding)
    cdef float[:, :, :, ::1] xp = xp_arr
    cdef float[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=F32)
    cdef float[::1] b = np.ascontiguousarray(b_arr, dtype=F32)
    cdef Py_ssize_t n = xp.shape[0], ci = xp.shape[1]
    cdef Py_ssize_t hp = xp.shape[2], wp = xp.shape[3]
    cdef Py_ssize_t co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (hp - kh) // stride + 1
    cdef Py_ssize_t ow = (wp - kw) // stride + 1
    acc_arr = np.zeros((n, co, oh, ow), dtype=F64)
    cdef double[:, :, :, ::1] acc = acc_arr
    cdef Py_ssize_t b_i, o_c, i_c, ky, kx, oy, ox
    cdef double wv
    cdef const float* xrow
    cdef double* orow
    with nogil:
        for b_i in range(n):
            for o_c in range(co):
                for i_c in range(ci):
                    for ky in range(kh):
                        for kx in range(kw):
                            wv = w[o_c, i_c, ky, kx]
                            if stride == 1:
                                for oy in range(oh):
                                    xrow = &xp[b_i, i_c, oy + ky, kx]
                                    orow = &acc[b_i, o_c, oy, 0]
                                    for ox in range(ow):
                                        orow[ox] += wv * xrow[ox]
                            else:
                                for oy in range(oh):
                                    xrow = &xp[b_i, i_c, oy * stride + ky, kx]
                                    orow = &acc[b_i, o_c, oy, 0]
                                    for ox in range(ow):
                                        orow[ox] += wv * xrow[ox * stride]
                for oy in range(oh):
                    for ox in range(ow):
                        acc[b_i, o_c, oy, ox] += b[o_c]
    return acc_arr.astype(F32)


def conv2d_backward_input(gy_arr, w_arr, x_shape, int stride, int padding):
    cdef float[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=F32)
    cdef float[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=F32)
    cdef Py_ssize_t n = x_shape[0], ci = x_shape[1], h = x_shape[2], wd = x_shape[3]
    cdef Py_ssize_t co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    gxp_arr = np.zeros((n, ci, h + 2 * padding, wd + 2 * padding), dtype=F64)
    cdef double[:, :, :, ::1] gxp = gxp_arr
    cdef Py_ssize_t b_i, o_c, i_c, ky, kx, oy, ox
    cdef double wv
    cdef const float* grow
    cdef double* xrow
    with nogil:
        for b_i in range(n):
            for i_c in range(ci):
                for o_c in range(co):
                    for ky in range(kh):
                        for kx in range(kw):
                            wv = w[o_c, i_c, ky, kx]
                            if stride == 1:
                                for oy in range(oh):
                                    grow = &gy[b_i, o_c, oy, 0]
                                    xrow = &gxp[b_i, i_c, oy + ky, kx]
                                    for ox in range(ow):
                                        xrow[ox] += wv * grow[ox]
                            else:
                                for oy in range(oh):
                                    grow = &gy[b_i, o_c, oy, 0]
                                    xrow = &gxp[b_i, i_c, oy * stride + ky, kx]
                                    for ox in range(ow):
                                        xrow[ox * stride] += wv * grow[ox]
    if padding == 0:
        return gxp_arr.astype(F32)
    return gxp_arr[:, :, padding : padding + h, padding : padding + wd].astype(F32)


def conv2d_backward_weights(gy_arr, x_arr, w_shape, int stride, int padding):
    xp_arr = _padded(x_arr, padding)
    cdef float[:, :, :, ::1] xp = xp_arr
    cdef float[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=F32)
    cdef Py_ssize_t co = w_shape[0], ci = w_shape[1], kh = w_shape[2], kw = w_shape[3]
    cdef Py_ssize_t n = xp.shape[0], oh = gy.shape[2], ow = gy.shape[3]
    gw_arr = np.zeros((co, ci, kh, kw), dtype=F64)
    gb_arr = np.zeros(co, dtype=F64)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t b_i, o_c, i_c, ky, kx, oy, ox, ow4
    cdef double acc, a0, a1, a2, a3, bacc
    cdef const float* grow
    cdef const float* xrow
    ow4 = ow - (ow & 3)
    with nogil:
        for b_i in range(n):
            for o_c in range(co):
                bacc = 0.0
                for oy in range(oh):
                    grow = &gy[b_i, o_c, oy, 0]
                    for ox in range(ow):
                        bacc += grow[ox]
                gb[o_c] += bacc
                for i_c in range(ci):
                    for ky in range(kh):
                        for kx in range(kw):
                            # four independent accumulator chains so the
                            # strict-FP reduction still pipelines
                            a0 = a1 = a2 = a3 = 0.0
                            if stride == 1:
                                for oy in range(oh):
                                    grow = &gy[b_i, o_c, oy, 0]
                                    xrow = &xp[b_i, i_c, oy + ky, kx]
                                    for ox in range(0, ow4, 4):
                                        a0 += grow[ox] * xrow[ox]
                                        a1 += grow[ox + 1] * xrow[ox + 1]
                                        a2 += grow[ox + 2] * xrow[ox + 2]
                                        a3 += grow[ox + 3] * xrow[ox + 3]
                                    for ox in range(ow4, ow):
                                        a0 += grow[ox] * xrow[ox]
                            else:
                                for oy in range(oh):
                                    grow = &gy[b_i, o_c, oy, 0]
                                    xrow = &xp[b_i, i_c, oy * stride + ky, kx]
                                    for ox in range(ow):
                                        a0 += grow[ox] * xrow[ox * stride]
                            acc = (a0 + a1) + (a2 + a3)
                            gw[o_c, i_c, ky, kx] += acc
    return gw_arr.astype(F32), gb_arr.astype(F32)


def maxpool_forward(x_arr, int kernel, int stride):
    cdef float[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=F32)
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oh = (h - kernel) // stride + 1
    cdef Py_ssize_t ow = (wd - kernel) // stride + 1
    out_arr = np.empty((n, c, oh, ow), dtype=F32)
    arg_arr = np.empty((n, c, oh, ow), dtype=np.int64)
    cdef float[:, :, :, ::1] out = out_arr
    cdef long long[:, :, :, ::1] arg = arg_arr
    cdef Py_ssize_t b_i, ch, oy, ox, ky, kx, iy, ix, best_idx
    cdef float best, v
    with nogil:
        for b_i in range(n):
            for ch in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        best = x[b_i, ch, oy * stride, ox * stride]
                        best_idx = (oy * stride) * wd + ox * stride
                        for ky in range(kernel):
                            iy = oy * stride + ky
                            for kx in range(kernel):
                                ix = ox * stride + kx
                                v = x[b_i, ch, iy, ix]
                                if v > best:
                                    best = v
                                    best_idx = iy * wd + ix
                        out[b_i, ch, oy, ox] = best
                        arg[b_i, ch, oy, ox] = best_idx
    return out_arr, arg_arr


def maxpool_backward(gy_arr, arg_arr, x_shape, int kernel, int stride):
    cdef float[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=F32)
    cdef long long[:, :, :, ::1] arg = np.ascontiguousarray(arg_arr, dtype=np.int64)
    cdef Py_ssize_t n = x_shape[0], c = x_shape[1], h = x_shape[2], wd = x_shape[3]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    gx_arr = np.zeros((n, c, h * wd), dtype=F64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t b_i, ch, oy, ox
    with nogil:
        for b_i in range(n):
            for ch in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        gx[b_i, ch, arg[b_i, ch, oy, ox]] += gy[b_i, ch, oy, ox]
    return gx_arr.reshape(n, c, h, wd).astype(F32)
