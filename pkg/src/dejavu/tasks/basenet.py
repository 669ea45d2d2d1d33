"""Encoder-decoder base networks for dense prediction.

A strided Conv-BN-ReLU encoder with nearest-upsample skip decoder, topped
by per-task heads: softmax probabilities for segmentation, an exponential
head for depth (positive by construction), channelwise L2 normalization
for surface normals. The multitask variant shares the whole trunk and adds
one head per task.
"""

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..autodiff import concat, exp, l2_normalize, softmax, upsample_nearest2x
from ..core import ConfigError

TASKS = ("segmentation", "depth", "normals")
HEAD_CHANNELS = {"depth": 1, "normals": 3}


@dataclass
class BaseNetConfig:
    task: str = "segmentation"
    classes: int = 3
    width: int = 32
    depth_levels: int = 3

    def __post_init__(self):
        if self.task not in TASKS + ("multitask",):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task in ("segmentation", "multitask") and self.classes < 2:
            raise ConfigError("segmentation needs at least 2 classes")
        if self.width < 1 or self.depth_levels < 1:
            raise ConfigError("width and depth_levels must be positive")

    @property
    def tasks(self):
        return TASKS if self.task == "multitask" else (self.task,)

    def head_channels(self, task):
        return self.classes if task == "segmentation" else HEAD_CHANNELS[task]

    @property
    def condition_channels(self):
        """Channel count of the condition tensor fed to the regenerator."""
        return sum(self.head_channels(t) for t in self.tasks)


class BaseNet(nn.Module):
    def __init__(self, cfg, rng, dtype=np.float64):
        super().__init__()
        self.cfg = cfg
        w = cfg.width
        self.stem = nn.ConvBNReLU(3, w, rng, dtype=dtype)
        downs, ups = [], []
        for lvl in range(cfg.depth_levels - 1):
            cin, cout = w * 2**lvl, w * 2 ** (lvl + 1)
            downs.append(nn.ConvBNReLU(cin, cout, rng, stride=2, dtype=dtype))
        for lvl in range(cfg.depth_levels - 1, 0, -1):
            deep, skip = w * 2**lvl, w * 2 ** (lvl - 1)
            ups.append(nn.ConvBNReLU(deep + skip, skip, rng, dtype=dtype))
        self.downs = nn.Sequential(*downs)
        self.ups = nn.Sequential(*ups)
        heads = {}
        for t in cfg.tasks:
            heads[t] = nn.Conv2d(w, cfg.head_channels(t), 3, rng, pad=1, dtype=dtype)
        self.heads = nn.Sequential(*[heads[t] for t in cfg.tasks])
        self._head_order = tuple(cfg.tasks)

    def trunk(self, x):
        h, w = x.shape[-2:]
        stride = 2 ** (self.cfg.depth_levels - 1)
        if h % stride or w % stride:
            raise ConfigError(f"input {h}x{w} not divisible by encoder stride {stride}")
        feats = [self.stem(x)]
        for down in self.downs:
            feats.append(down(feats[-1]))
        y = feats[-1]
        for i, up in enumerate(self.ups):
            y = upsample_nearest2x(y)
            y = up(concat([y, feats[-(i + 2)]], axis=1))
        return y

    def forward(self, x):
        """Returns {task: condition tensor}; batched (B,C,H,W) in and out."""
        y = self.trunk(x)
        out = {}
        for t, head in zip(self._head_order, self.heads):
            z = head(y)
            if t == "segmentation":
                out[t] = softmax(z, axis=1)
            elif t == "depth":
                out[t] = exp(z)
            else:
                out[t] = l2_normalize(z, axis=1)
        return out

    def condition(self, x):
        """Condition tensor for the regenerator: heads concatenated in a
        fixed order (segmentation, depth, normals) for multitask."""
        out = self.forward(x)
        parts = [out[t] for t in self._head_order]
        return parts[0] if len(parts) == 1 else concat(parts, axis=1)


def basenet_forward(img, net):
    return net(img)
