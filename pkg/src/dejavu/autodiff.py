"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and, while gradients are enabled, records a
closure that routes the output gradient to its parents. Graphs are plain
DAGs: shared parameters and repeated module application (recursive
regeneration steps, second passes through the base network) accumulate
gradients naturally.

Scalar constants stay python floats inside the ops so float32 graphs are
not upcast. Broadcasting follows numpy; gradients are sum-reduced back to
the parent shape.
"""

import contextlib

import numpy as np

from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Backpropagate from this (typically scalar) tensor."""
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t, g):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _node(data, parents, backward):
    req = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req)
    if req:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ----------------------------------------------------------


def add(a, b):
    if isinstance(b, (int, float)) or isinstance(a, (int, float)):
        t, c = (a, b) if isinstance(a, Tensor) else (b, a)

        def bwd(g):
            _accum(t, g)

        return _node(t.data + c, (t,), bwd)
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(a.data + b.data, (a, b), bwd)


def neg(a):
    def bwd(g):
        _accum(a, -g)

    return _node(-a.data, (a,), bwd)


def sub(a, b):
    if isinstance(b, (int, float)):
        return add(a, -b)
    if isinstance(a, (int, float)):
        return add(neg(b), a)
    return add(a, neg(b))


def mul(a, b):
    if isinstance(b, (int, float)) or isinstance(a, (int, float)):
        t, c = (a, b) if isinstance(a, Tensor) else (b, a)

        def bwd(g):
            _accum(t, g * c)

        return _node(t.data * c, (t,), bwd)
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(a.data * b.data, (a, b), bwd)


def div(a, b):
    if isinstance(b, (int, float)):
        return mul(a, 1.0 / b)
    b = as_tensor(b)
    if isinstance(a, (int, float)):
        c = a

        def bwd_c(g):
            _accum(b, _unbroadcast(-g * c / (b.data * b.data), b.data.shape))

        return _node(c / b.data, (b,), bwd_c)
    a = as_tensor(a)

    def bwd(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _node(a.data / b.data, (a, b), bwd)


def relu(a):
    mask = a.data > 0

    def bwd(g):
        _accum(a, g * mask)

    return _node(a.data * mask, (a,), bwd)


def exp(a):
    out_data = np.exp(a.data)

    def bwd(g):
        _accum(a, g * out_data)

    return _node(out_data, (a,), bwd)


def log(a):
    def bwd(g):
        _accum(a, g / a.data)

    return _node(np.log(a.data), (a,), bwd)


def sqrt(a):
    out_data = np.sqrt(a.data)

    def bwd(g):
        _accum(a, g * (0.5 / out_data))

    return _node(out_data, (a,), bwd)


def absolute(a):
    sign = np.sign(a.data)

    def bwd(g):
        _accum(a, g * sign)

    return _node(np.abs(a.data), (a,), bwd)


def square(a):
    def bwd(g):
        _accum(a, g * (2.0 * a.data))

    return _node(a.data * a.data, (a,), bwd)


# -- reductions / shape --------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
            return
        gk = g if keepdims else np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gk, a.data.shape).copy())

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        count = a.data.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for i in ax:
            count *= a.data.shape[i]

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / count, a.data.shape).copy())
            return
        gk = g if keepdims else np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gk / count, a.data.shape).copy())

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), bwd)


def reshape(a, shape):
    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), bwd)


def transpose(a, axes=()):
    if not axes:
        axes = tuple(range(a.data.ndim - 1, -1, -1))
    inv = np.argsort(axes)

    def bwd(g):
        _accum(a, g.transpose(inv))

    return _node(a.data.transpose(axes), (a,), bwd)


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        sl = [slice(None)] * g.ndim
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bwd)


def getitem(a, idx):
    """Basic (slice/int) indexing only; each input element is read at most once."""

    def bwd(g):
        ga = np.zeros_like(a.data)
        ga[idx] = g
        _accum(a, ga)

    return _node(a.data[idx], (a,), bwd)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        ad, bd = a.data, b.data
        if a.requires_grad:
            if bd.ndim == 1:
                ga = g[..., None] * bd
            else:
                gg = g[..., None, :] if ad.ndim == 1 else g
                ga = np.matmul(gg, bd.swapaxes(-1, -2))
                if ad.ndim == 1:
                    ga = ga.reshape(ad.shape[0])
            _accum(a, _unbroadcast(ga, ad.shape))
        if b.requires_grad:
            if ad.ndim == 1:
                gb = g * ad if bd.ndim == 1 else np.outer(ad, g)
            else:
                gg = g[..., None] if bd.ndim == 1 else g
                gb = np.matmul(ad.swapaxes(-1, -2), gg)
                if bd.ndim == 1:
                    gb = gb.reshape(bd.shape)
            _accum(b, _unbroadcast(gb, bd.shape))

    return _node(np.matmul(a.data, b.data), (a, b), bwd)


# -- structured ops ------------------------------------------------------


def conv2d(x, w, b=None, stride=1, pad=0):
    """2D convolution, NCHW. Weight (Cout, Cin, kh, kw); bias optional."""
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    y = kernels.conv2d_forward(xd, wd, stride, pad)
    if b is not None:
        y = y + b.data[None, :, None, None]
    kh, kw = wd.shape[2], wd.shape[3]
    h, wdt = xd.shape[2], xd.shape[3]
    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(x, kernels.conv2d_backward_input(g, wd, stride, pad, h, wdt))
        if w.requires_grad:
            _accum(w, kernels.conv2d_backward_weight(xd, g, stride, pad, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))

    return _node(y, parents, bwd)


def conv_transpose2d(x, w, b=None, stride=1):
    """Transposed convolution, NCHW. Weight (Cin, Cout, kh, kw), no padding.

    Output spatial size is (H-1)*stride + kh. The forward pass is the
    input-gradient of a matching conv2d, so it reuses the same kernels.
    """
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    ci, co, kh, kw = wd.shape
    h, wdt = xd.shape[2], xd.shape[3]
    oh = (h - 1) * stride + kh
    ow = (wdt - 1) * stride + kw
    y = kernels.conv2d_backward_input(xd, wd, stride, 0, oh, ow)
    if b is not None:
        y = y + b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(x, kernels.conv2d_forward(g, wd, stride, 0))
        if w.requires_grad:
            _accum(w, kernels.conv2d_backward_weight(g, xd, stride, 0, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))

    return _node(y, parents, bwd)


def upsample_nearest2x(x):
    xd = x.data
    y = xd.repeat(2, axis=2).repeat(2, axis=3)

    def bwd(g):
        bsz, c, h2, w2 = g.shape
        _accum(x, g.reshape(bsz, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)))

    return _node(y, (x,), bwd)


# -- composite numerics ---------------------------------------------------


def softmax(x, axis=1):
    shift = sub(x, Tensor(x.data.max(axis=axis, keepdims=True)))
    e = exp(shift)
    return div(e, tsum(e, axis=axis, keepdims=True))


def log_softmax(x, axis=1):
    shift = sub(x, Tensor(x.data.max(axis=axis, keepdims=True)))
    e = exp(shift)
    return sub(shift, log(tsum(e, axis=axis, keepdims=True)))


def l2_normalize(x, axis=1, eps=1e-12):
    norm = sqrt(add(tsum(square(x), axis=axis, keepdims=True), eps))
    return div(x, norm)
