"""Shared-attention extension.

One multi-head attention block serves two passes. The enhancement pass
queries the predictions against image keys/values and decodes enhanced
predictions (used as the final outputs). The regeneration pass, run only
during training, queries a spectrally redacted image against prediction
keys/values and decodes an image for the regeneration loss. Six patch
embedders feed the single MHA, so its weights take gradient from both
supervision paths.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from . import redaction as red
from .autodiff import (Tensor, as_tensor, concat, exp, l2_normalize, matmul,
                       relu, softmax, transpose)
from .core import ConfigError


@dataclass
class SaConfig:
    patch: int = 4
    dim: int = 64
    heads: int = 4
    spectral_spec: object = None

    def __post_init__(self):
        if self.patch < 1 or self.dim < 1 or self.heads < 1:
            raise ConfigError("sa patch/dim/heads must be positive")
        if self.dim % self.heads:
            raise ConfigError(f"heads={self.heads} must divide dim={self.dim}")
        if self.spectral_spec is None:
            self.spectral_spec = red.RedactionSpec("spectral", "lowpass", band=(0.0, 0.5))
        if self.spectral_spec.domain != "spectral":
            raise ConfigError("sa redaction must be spectral")


class PatchEmbed(nn.Module):
    """Non-overlapping p x p patches, each linearly projected to dim."""

    def __init__(self, cin, patch, dim, rng, dtype=np.float64):
        super().__init__()
        self.cin = cin
        self.patch = patch
        self.proj = nn.Linear(cin * patch * patch, dim, rng, dtype=dtype)

    def forward(self, x):
        b, c, h, w = x.shape
        p = self.patch
        if c != self.cin:
            raise ConfigError(f"embedder expects {self.cin} channels, got {c}")
        if h % p or w % p:
            raise ConfigError(f"spatial size {h}x{w} not divisible by patch {p}")
        t = x.reshape((b, c, h // p, p, w // p, p))
        t = transpose(t, (0, 2, 4, 1, 3, 5))
        t = t.reshape((b, (h // p) * (w // p), c * p * p))
        return self.proj(t)


class SharedMha(nn.Module):
    """Scaled dot-product attention over embedded tokens plus an output
    projection. The q/k/v projections live in the patch embedders, so this
    block is the piece both passes literally share."""

    def __init__(self, dim, heads, rng, dtype=np.float64):
        super().__init__()
        self.dim = dim
        self.heads = heads
        self.out = nn.Linear(dim, dim, rng, dtype=dtype)
        self.last_attention = None

    def forward(self, q, k, v):
        b, t, d = q.shape
        hd = d // self.heads
        def split(x):
            return transpose(x.reshape((b, x.shape[1], self.heads, hd)), (0, 2, 1, 3))
        qh, kh, vh = split(q), split(k), split(v)
        scores = matmul(qh, transpose(kh, (0, 1, 3, 2))) * (1.0 / np.sqrt(hd))
        attn = softmax(scores, axis=3)
        self.last_attention = attn.data.copy()
        mixed = matmul(attn, vh)
        mixed = transpose(mixed, (0, 2, 1, 3)).reshape((b, t, d))
        return self.out(mixed)


class Decoder(nn.Module):
    """Token grid -> transposed conv to full resolution -> 3x3 head."""

    def __init__(self, dim, patch, cout, rng, width=16, dtype=np.float64):
        super().__init__()
        self.patch = patch
        self.up = nn.ConvTranspose2d(dim, width, patch, rng, stride=patch, dtype=dtype)
        self.head = nn.Conv2d(width, cout, 3, rng, pad=1, dtype=dtype)

    def forward(self, tokens, hw):
        b, t, d = tokens.shape
        h, w = hw
        p = self.patch
        grid = tokens.reshape((b, h // p, w // p, d))
        grid = transpose(grid, (0, 3, 1, 2))
        return self.head(relu(self.up(grid)))


class SharedAttention(nn.Module):
    """Both passes around one MHA block.

    head_spec: sequence of (task, channels) describing the condition
    layout; the enhancement decoder applies the matching activation per
    group (softmax / exp / unit-normalize) so outputs remain valid
    conditions.
    """

    def __init__(self, cfg, head_spec, rng, dtype=np.float64):
        super().__init__()
        self.cfg = cfg
        self.head_spec = tuple(head_spec)
        n = sum(ch for _, ch in self.head_spec)
        p, d = cfg.patch, cfg.dim
        self.q = PatchEmbed(n, p, d, rng, dtype)
        self.k = PatchEmbed(3, p, d, rng, dtype)
        self.v = PatchEmbed(3, p, d, rng, dtype)
        self.qp = PatchEmbed(3, p, d, rng, dtype)
        self.kp = PatchEmbed(n, p, d, rng, dtype)
        self.vp = PatchEmbed(n, p, d, rng, dtype)
        self.mha = SharedMha(d, cfg.heads, rng, dtype)
        self.dec_e = Decoder(d, p, n, rng, dtype=dtype)
        self.dec_r = Decoder(d, p, 3, rng, dtype=dtype)

    def _activate(self, raw):
        parts, lo = [], 0
        for task, ch in self.head_spec:
            seg = raw[:, lo : lo + ch]
            if task == "segmentation":
                parts.append(softmax(seg, axis=1))
            elif task == "depth":
                parts.append(exp(seg))
            elif task == "normals":
                parts.append(l2_normalize(seg, axis=1))
            else:
                raise ConfigError(f"unknown task {task!r} in head_spec")
            lo += ch
        return parts[0] if len(parts) == 1 else concat(parts, axis=1)

    @staticmethod
    def _promote(img, cond):
        img, cond = as_tensor(img), as_tensor(cond)
        squeeze = img.ndim == 3
        if squeeze:
            img = img.reshape((1,) + img.shape)
        if cond.ndim == 3:
            cond = cond.reshape((1,) + cond.shape)
        return img, cond, squeeze

    def enhancement_pass(self, img, cond):
        """Final predictions: prediction queries attend over image tokens."""
        img, cond, squeeze = self._promote(img, cond)
        hw = img.shape[-2:]
        tokens = self.mha(self.q(cond), self.k(img), self.v(img))
        out = self._activate(self.dec_e(tokens, hw))
        return out.reshape(out.shape[1:]) if squeeze else out

    def regeneration_pass(self, img, cond):
        """Training-only: redacted-image queries attend over prediction
        tokens; decodes a regenerated image. The redacted image is data,
        not a gradient path."""
        img, cond, squeeze = self._promote(img, cond)
        hw = img.shape[-2:]
        img_r = Tensor(red.redact(img.data, self.cfg.spectral_spec))
        tokens = self.mha(self.qp(img_r), self.kp(cond), self.vp(cond))
        out = self.dec_r(tokens, hw)
        return out.reshape(out.shape[1:]) if squeeze else out


def sa_regeneration_pass(img, cond, sa):
    return sa.regeneration_pass(img, cond)


def sa_enhancement_pass(img, cond, sa):
    return sa.enhancement_pass(img, cond)


def sa_macs(h, w, cfg, cond_channels):
    """Closed-form multiply-accumulate count for one enhancement pass."""
    p, d, heads = cfg.patch, cfg.dim, cfg.heads
    t = (h // p) * (w // p)
    embed = t * (cond_channels * p * p * d) + 2 * t * (3 * p * p * d)
    attn = 2 * heads * t * t * (d // heads)
    out_proj = t * d * d
    dec_w = 16
    dec = t * d * dec_w * p * p + h * w * dec_w * cond_channels * 9
    return embed + attn + out_proj + dec
