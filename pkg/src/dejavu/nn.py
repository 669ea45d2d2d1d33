"""Minimal module system over the autodiff engine.

Modules register parameters, buffers, and submodules through attribute
assignment, so state_dict naming follows the attribute path. Construction
threads a numpy Generator through the layers in a fixed order, which makes
initialization reproducible for a given seed.
"""

import contextlib

import numpy as np

from .autodiff import (Tensor, add, conv2d, conv_transpose2d, div, matmul,
                       mul, relu, sqrt, sub, transpose)

_bn_stats_frozen = False


@contextlib.contextmanager
def frozen_batchnorm_stats():
    """Keep training-mode normalization but stop running-stat updates.

    Used for extra forward passes that should not shift the statistics the
    eval path depends on (consistency passes, gradient checks).
    """
    global _bn_stats_frozen
    prev = _bn_stats_frozen
    _bn_stats_frozen = True
    try:
        yield
    finally:
        _bn_stats_frozen = prev


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, value):
        self._buffers[name] = np.asarray(value)
        object.__setattr__(self, name, self._buffers[name])

    def named_parameters(self, prefix=""):
        for n, p in self._params.items():
            yield prefix + n, p
        for n, m in self._modules.items():
            yield from m.named_parameters(prefix + n + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for n, b in self._buffers.items():
            yield prefix + n, b
        for n, m in self._modules.items():
            yield from m.named_buffers(prefix + n + ".")

    def modules(self):
        yield self
        for m in self._modules.values():
            yield from m.modules()

    def train(self, mode=True):
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def state_dict(self):
        out = {}
        for n, p in self.named_parameters():
            out[n] = p.data.copy()
        for n, b in self.named_buffers():
            out[n] = b.copy()
        return out

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        expected = set(own) | set(bufs)
        got = set(state)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"state mismatch: missing={missing} unexpected={extra}")
        for n, p in own.items():
            if p.data.shape != state[n].shape:
                raise ValueError(f"shape mismatch for {n}: {p.data.shape} vs {state[n].shape}")
            p.data = state[n].astype(p.data.dtype, copy=True)
        for n, b in bufs.items():
            b[...] = state[n]

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _he(rng, shape, fan_in, dtype):
    return Tensor(
        (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype),
        requires_grad=True,
    )


class Conv2d(Module):
    def __init__(self, cin, cout, k, rng, stride=1, pad=0, bias=True, dtype=np.float64):
        super().__init__()
        self.stride = stride
        self.pad = pad
        self.weight = _he(rng, (cout, cin, k, k), cin * k * k, dtype)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.pad)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, k, rng, stride=1, bias=True, dtype=np.float64):
        super().__init__()
        self.stride = stride
        self.weight = _he(rng, (cin, cout, k, k), cin * k * k, dtype)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x):
        return conv_transpose2d(x, self.weight, self.bias, self.stride)


class Linear(Module):
    def __init__(self, cin, cout, rng, bias=True, dtype=np.float64):
        super().__init__()
        self.weight = _he(rng, (cout, cin), cin, dtype)
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x):
        y = matmul(x, transpose(self.weight))
        return add(y, self.bias) if self.bias is not None else y


class BatchNorm2d(Module):
    def __init__(self, c, dtype=np.float64, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.weight = Tensor(np.ones(c, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(c, dtype=dtype), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(c, dtype=dtype))
        self.register_buffer("running_var", np.ones(c, dtype=dtype))

    def forward(self, x):
        c = x.shape[1]
        if self.training:
            mu = x.mean(axis=(0, 2, 3), keepdims=True)
            xc = sub(x, mu)
            var = mul(xc, xc).mean(axis=(0, 2, 3), keepdims=True)
            if not _bn_stats_frozen:
                n = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
                unbiased = var.data.reshape(c) * (n / max(n - 1, 1))
                m = self.momentum
                self.running_mean[...] = (1 - m) * self.running_mean + m * mu.data.reshape(c)
                self.running_var[...] = (1 - m) * self.running_var + m * unbiased
            xhat = div(xc, sqrt(add(var, self.eps)))
        else:
            mu = Tensor(self.running_mean.reshape(1, c, 1, 1))
            sd = Tensor(np.sqrt(self.running_var + self.eps).reshape(1, c, 1, 1))
            xhat = div(sub(x, mu), sd)
        w = self.weight.reshape((1, c, 1, 1))
        b = self.bias.reshape((1, c, 1, 1))
        return add(mul(xhat, w), b)


class ReLU(Module):
    def forward(self, x):
        return relu(x)


class Sequential(Module):
    def __init__(self, *mods):
        super().__init__()
        for i, m in enumerate(mods):
            setattr(self, str(i), m)
        self._seq = mods

    def forward(self, x):
        for m in self._seq:
            x = m(x)
        return x

    def __iter__(self):
        return iter(self._seq)

    def __len__(self):
        return len(self._seq)


class ConvBNReLU(Module):
    """3x3 conv (stride/pad configurable) + batch norm + relu."""

    def __init__(self, cin, cout, rng, k=3, stride=1, pad=1, dtype=np.float64):
        super().__init__()
        self.conv = Conv2d(cin, cout, k, rng, stride=stride, pad=pad, bias=False, dtype=dtype)
        self.bn = BatchNorm2d(cout, dtype=dtype)

    def forward(self, x):
        return relu(self.bn(self.conv(x)))
