"""Pure-numpy convolution kernels (im2col + BLAS matmul).

Reference implementation for the numba backend and the fallback path when
numba is unavailable or disabled via DEJAVU_BACKEND=numpy.

All arrays are NCHW, float32 or float64. Output sizes follow the usual
convention OH = (H + 2*pad - kh) // stride + 1.
"""

import numpy as np


def _im2col(x, kh, kw, stride, pad):
    b, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad > 0:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s0, s1, s2, s3 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    # (b, c*kh*kw, oh*ow); reshape copies out of the strided view
    return view.reshape(b, c * kh * kw, oh * ow), oh, ow


def conv2d_forward(x, w, stride, pad):
    b = x.shape[0]
    co, ci, kh, kw = w.shape
    cols, oh, ow = _im2col(x, kh, kw, stride, pad)
    y = np.matmul(w.reshape(co, ci * kh * kw), cols)
    return y.reshape(b, co, oh, ow)


def conv2d_backward_input(gy, w, stride, pad, h, wdt):
    b, co, oh, ow = gy.shape
    _, ci, kh, kw = w.shape
    # (b, ci*kh*kw, oh*ow)
    gcols = np.matmul(w.reshape(co, -1).T, gy.reshape(b, co, oh * ow))
    gcols = gcols.reshape(b, ci, kh, kw, oh, ow)
    hp, wp = h + 2 * pad, wdt + 2 * pad
    gxp = np.zeros((b, ci, hp, wp), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += gcols[
                :, :, i, j
            ]
    if pad > 0:
        return gxp[:, :, pad : pad + h, pad : pad + wdt]
    return gxp


def conv2d_backward_weight(x, gy, stride, pad, kh, kw):
    b, co, oh, ow = gy.shape
    ci = x.shape[1]
    cols, _, _ = _im2col(x, kh, kw, stride, pad)
    gw = np.matmul(gy.reshape(b, co, oh * ow), cols.transpose(0, 2, 1)).sum(axis=0)
    return gw.reshape(co, ci, kh, kw)
