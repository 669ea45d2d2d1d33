"""Conditional regeneration module.

Rebuilds the original image from a redacted copy plus dense predictions.
Two wirings: a forward stack of Conv-BN-ReLU blocks (crm_forward), and a
recursive variant that reuses one shared block to emit image residuals
(crm_recursive). Conditioning enters either by channel concatenation or by
multiplying the condition with the channel-averaged redacted image.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .autodiff import Tensor, as_tensor, concat, mul, tmean
from .core import ConfigError, ShapeMismatchError

MODES = ("forward", "recursive")
COMBINES = ("multiply", "concat")


@dataclass
class CrmConfig:
    mode: str = "forward"
    combine: str = "concat"
    width: int = 64
    depth: int = 4
    steps: int = 4
    condition_channels: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"crm.mode must be one of {MODES}, got {self.mode!r}")
        if self.combine not in COMBINES:
            raise ConfigError(f"crm.combine must be one of {COMBINES}, got {self.combine!r}")
        if self.width < 1 or self.depth < 1 or self.condition_channels < 1:
            raise ConfigError("crm width/depth/condition_channels must be positive")
        if self.steps < 0:
            raise ConfigError("crm.steps must be >= 0")


def default_mode(redaction_variant):
    """Recursive for random occlusion, forward for structured or spectral."""
    return "recursive" if redaction_variant == "random" else "forward"


def _4d(x):
    x = as_tensor(x)
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatchError(f"expected 3D or 4D tensor, got {x.shape}")


def combine_inputs(img_r, cond, combine):
    """Merge redacted image and condition into the CRM input tensor.

    multiply: mean over the image channels, broadcast against the condition
    channels, elementwise product -> N channels. concat: [image; condition]
    -> 3+N channels. Accepts (C,H,W) or (B,C,H,W); batch dim is preserved.
    """
    img_r, squeeze = _4d(img_r)
    cond, _ = _4d(cond)
    if img_r.shape[0] != cond.shape[0] or img_r.shape[2:] != cond.shape[2:]:
        raise ShapeMismatchError(f"image {img_r.shape} vs condition {cond.shape}")
    if combine == "multiply":
        gray = tmean(img_r, axis=1, keepdims=True)
        out = mul(gray, cond)
    elif combine == "concat":
        out = concat([img_r, cond], axis=1)
    else:
        raise ConfigError(f"unknown combine {combine!r}")
    return out.reshape(out.shape[1:]) if squeeze else out


class Crm(nn.Module):
    """CRM weights for either mode; forward dispatches on cfg.mode."""

    def __init__(self, cfg, rng, dtype=np.float64):
        super().__init__()
        self.cfg = cfg
        n = cfg.condition_channels
        cmb_ch = n if cfg.combine == "multiply" else 3 + n
        if cfg.mode == "forward":
            blocks = []
            cin = cmb_ch
            for _ in range(cfg.depth):
                blocks.append(nn.ConvBNReLU(cin, cfg.width, rng, dtype=dtype))
                cin = cfg.width
            self.blocks = nn.Sequential(*blocks)
        else:
            # one shared block; each step sees [current estimate; conditioning]
            self.blocks = nn.Sequential(nn.ConvBNReLU(3 + cmb_ch, cfg.width, rng, dtype=dtype))
        self.head = nn.Conv2d(cfg.width, 3, 1, rng, dtype=dtype)

    def _check(self, cond):
        if cond.shape[1] != self.cfg.condition_channels:
            raise ConfigError(
                f"condition has {cond.shape[1]} channels, "
                f"config says {self.cfg.condition_channels}"
            )

    def forward(self, img_r, cond):
        img_r, squeeze = _4d(img_r)
        cond, _ = _4d(cond)
        self._check(cond)
        if self.cfg.mode == "forward":
            h = combine_inputs(img_r, cond, self.cfg.combine)
            out = self.head(self.blocks(h))
        else:
            cmb = combine_inputs(img_r, cond, self.cfg.combine)
            x = img_r
            for _ in range(self.cfg.steps):
                x = x + self.head(self.blocks(concat([x, cmb], axis=1)))
            out = x
        return out.reshape(out.shape[1:]) if squeeze else out


def crm_forward(img_r, cond, crm):
    if crm.cfg.mode != "forward":
        raise ConfigError("crm_forward requires mode=forward")
    return crm(img_r, cond)


def crm_recursive(img_r, cond, crm):
    if crm.cfg.mode != "recursive":
        raise ConfigError("crm_recursive requires mode=recursive")
    return crm(img_r, cond)
