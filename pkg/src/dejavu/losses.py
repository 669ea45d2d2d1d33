"""Training objective: regeneration blend, perceptual distance, text and
cyclic consistency terms.

The perceptual extractor and text embedder are small frozen random conv
nets. They provide structured, fixed feature spaces for the distances; a
pretrained substitute can be dropped in where one is available.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from . import nn
from .autodiff import Tensor, as_tensor, l2_normalize, relu, square, tmean, tsum
from .core import ShapeMismatchError, TrainingDiverged


@dataclass
class LossWeights:
    gamma: float = 0.1
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma_text: float = 0.05
    gamma_cyc: float = 0.05

    def __post_init__(self):
        for name in ("gamma", "gamma1", "gamma2", "gamma_text", "gamma_cyc"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            setattr(self, name, v)


def weight_hash(params):
    """sha256 over parameter bytes; constant hash shows weights never moved."""
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p.data, dtype=np.float64).tobytes())
    return h.hexdigest()


def _pair(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} vs {b.shape}")
    return a, b


def mse_loss(a, b):
    a, b = _pair(a, b)
    return tmean(square(a - b))


def masked_mse_loss(a, b, valid):
    """MSE over pixels where valid (H,W or B,1,H,W broadcastable) is 1."""
    a, b = _pair(a, b)
    v = np.asarray(valid, dtype=a.data.dtype)
    if v.sum() == 0:
        raise ValueError("validity mask excludes every pixel")
    d = square(a - b) * Tensor(v)
    scale = a.data.size / np.broadcast_to(v, a.shape).sum()
    return tmean(d) * scale


class PerceptualExtractor(nn.Module):
    """Frozen 3-stage strided conv net; features tapped after each stage."""

    def __init__(self, rng, width=8, dtype=np.float64):
        super().__init__()
        stages = []
        cin = 3
        for i in range(3):
            cout = width * (2**i)
            stages.append(nn.Conv2d(cin, cout, 3, rng, stride=2, pad=1, dtype=dtype))
            cin = cout
        self.stages = nn.Sequential(*stages)
        for p in self.parameters():
            p.requires_grad = False

    def features(self, x):
        x, _ = _promote(x)
        feats = []
        for conv in self.stages:
            x = relu(conv(x))
            feats.append(x)
        return feats


def _promote(x):
    x = as_tensor(x)
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    return x, False


def perceptual_loss(gen, ref, ext):
    """Sum over tap layers of mean squared distance between unit-normalized
    features, averaged over space and batch."""
    gen, ref = _pair(gen, ref)
    total = None
    for fg, fr in zip(ext.features(gen), ext.features(ref)):
        d = square(l2_normalize(fg, axis=1) - l2_normalize(fr, axis=1))
        term = tmean(tsum(d, axis=1))
        total = term if total is None else total + term
    return total


def regen_loss(gen, ref, w, ext):
    return w.gamma1 * perceptual_loss(gen, ref, ext) + w.gamma2 * mse_loss(gen, ref)


class TextEmbedder(nn.Module):
    """Frozen random conv encoder to a D-dim global embedding."""

    def __init__(self, rng, dim=32, width=8, dtype=np.float64):
        super().__init__()
        self.dim = dim
        self.conv1 = nn.Conv2d(3, width, 3, rng, stride=2, pad=1, dtype=dtype)
        self.conv2 = nn.Conv2d(width, 2 * width, 3, rng, stride=2, pad=1, dtype=dtype)
        self.proj = nn.Linear(2 * width, dim, rng, dtype=dtype)
        for p in self.parameters():
            p.requires_grad = False

    def embed(self, x):
        x, squeezed = _promote(x)
        h = relu(self.conv2(relu(self.conv1(x))))
        pooled = tmean(h, axis=(2, 3))
        e = self.proj(pooled)
        return e.reshape((self.dim,)) if squeezed else e


def text_supervision_loss(img, gen, embedder):
    """Mean squared embedding distance, normalized by embedding length."""
    img, gen = _pair(img, gen)
    fi = embedder.embed(img)
    fg = embedder.embed(gen)
    d = square(fg - fi)
    if d.ndim == 1:
        return tsum(d) / float(embedder.dim)
    return tmean(tsum(d, axis=1) / float(embedder.dim))


def cyclic_consistency_loss(cond, gen, basenet_fn):
    """MSE between predictions on the regenerated image and the current
    predictions; the current predictions are the target (gradient stopped)."""
    cond = as_tensor(cond)
    c_g = basenet_fn(gen)
    return mse_loss(c_g, cond.detach())


def total_loss(l_base, l_regen, l_text, l_cyc, w):
    """l_base + gamma*l_regen + gamma_text*l_text + gamma_cyc*l_cyc."""
    for t in (l_base, l_regen, l_text, l_cyc):
        v = t.data if isinstance(t, Tensor) else t
        if not np.all(np.isfinite(v)):
            raise TrainingDiverged("non-finite loss term")
    return (
        as_tensor(l_base)
        + w.gamma * as_tensor(l_regen)
        + w.gamma_text * as_tensor(l_text)
        + w.gamma_cyc * as_tensor(l_cyc)
    )
