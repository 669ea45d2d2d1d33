"""Numba-jitted convolution kernels (direct loops, no im2col buffers).

Inner loops run over contiguous output columns with a stride-1
specialization so LLVM can vectorize them. Each output element is written
by exactly one prange iteration, so results are deterministic.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_forward(x, w, stride, pad):
    b, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((b, co, oh, ow), dtype=x.dtype)
    for bc in prange(b * co):
        bi = bc // co
        c = bc % co
        yim = y[bi, c]
        for cc in range(ci):
            xim = x[bi, cc]
            for i in range(kh):
                for j in range(kw):
                    wv = w[c, cc, i, j]
                    # output columns whose input column lands in [0, wd)
                    lo = max(0, -(-(pad - j) // stride))
                    hi = min(ow, (wd - 1 - j + pad) // stride + 1)
                    base = j - pad
                    for o in range(oh):
                        ih = o * stride + i - pad
                        if ih < 0 or ih >= h:
                            continue
                        xrow = xim[ih]
                        yrow = yim[o]
                        if stride == 1:
                            for q in range(lo, hi):
                                yrow[q] += wv * xrow[q + base]
                        else:
                            for q in range(lo, hi):
                                yrow[q] += wv * xrow[q * stride + base]
    return y


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_backward_input(gy, w, stride, pad, h, wd):
    b, co, oh, ow = gy.shape
    _, ci, kh, kw = w.shape
    gx = np.zeros((b, ci, h, wd), dtype=gy.dtype)
    for bc in prange(b * ci):
        bi = bc // ci
        cc = bc % ci
        gxim = gx[bi, cc]
        for c in range(co):
            gyim = gy[bi, c]
            for i in range(kh):
                for j in range(kw):
                    wv = w[c, cc, i, j]
                    lo = max(0, -(-(pad - j) // stride))
                    hi = min(ow, (wd - 1 - j + pad) // stride + 1)
                    base = j - pad
                    for o in range(oh):
                        ih = o * stride + i - pad
                        if ih < 0 or ih >= h:
                            continue
                        gyrow = gyim[o]
                        gxrow = gxim[ih]
                        if stride == 1:
                            for q in range(lo, hi):
                                gxrow[q + base] += wv * gyrow[q]
                        else:
                            for q in range(lo, hi):
                                gxrow[q * stride + base] += wv * gyrow[q]
    return gx


@njit(parallel=True, fastmath=True, cache=True)
def conv2d_backward_weight(x, gy, stride, pad, kh, kw):
    b, co, oh, ow = gy.shape
    ci = x.shape[1]
    h, wd = x.shape[2], x.shape[3]
    gw = np.zeros((co, ci, kh, kw), dtype=gy.dtype)
    for pair in prange(co * ci):
        c = pair // ci
        cc = pair % ci
        for i in range(kh):
            for j in range(kw):
                lo = max(0, -(-(pad - j) // stride))
                hi = min(ow, (wd - 1 - j + pad) // stride + 1)
                base = j - pad
                acc = gy.dtype.type(0.0)
                for bi in range(b):
                    gyim = gy[bi, c]
                    xim = x[bi, cc]
                    for o in range(oh):
                        ih = o * stride + i - pad
                        if ih < 0 or ih >= h:
                            continue
                        gyrow = gyim[o]
                        xrow = xim[ih]
                        if stride == 1:
                            for q in range(lo, hi):
                                acc += gyrow[q] * xrow[q + base]
                        else:
                            for q in range(lo, hi):
                                acc += gyrow[q] * xrow[q * stride + base]
                gw[c, cc, i, j] = acc
    return gw
