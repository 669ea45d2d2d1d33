"""Shared conventions: typed containers, seeded randomness, image file I/O.

Tensors are channel-first float arrays. Images live in [0,1]; file dumps
are 8-bit lossless PNG with round-half-up quantization so byte-exact
regression tests are possible.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image


class ConfigError(ValueError):
    """Bad or inconsistent configuration."""


class InvalidSpecError(ValueError):
    """Redaction parameters out of range or inconsistent."""


class ShapeMismatchError(ValueError):
    """Tensor arguments with incompatible shapes."""


class ImageFormatError(ValueError):
    """Image file not 8-bit RGB."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; the run is aborted."""


@dataclass
class ImageTensor:
    """RGB image, channel-first (3,H,W), values in [0,1] for inputs."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3 or d.shape[0] != 3:
            raise ShapeMismatchError(f"expected (3,H,W), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("image contains non-finite values")
        self.data = d

    @property
    def hw(self):
        return self.data.shape[1], self.data.shape[2]


@dataclass
class DenseCondition:
    """Dense prediction (N,H,W) with a task tag fixing its semantics.

    segmentation: per-pixel class probabilities (channel sum 1)
    depth: single positive channel
    normals: unit 3-vectors per pixel
    """

    data: np.ndarray
    task: str

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3:
            raise ShapeMismatchError(f"expected (N,H,W), got {d.shape}")
        if self.task not in ("segmentation", "depth", "normals"):
            raise ValueError(f"unknown task {self.task!r}")
        self.data = d

    def validate(self):
        d = self.data
        if not np.all(np.isfinite(d)):
            raise ValueError("condition contains non-finite values")
        if self.task == "segmentation":
            if np.any(d < 0):
                raise ValueError("segmentation probabilities must be nonnegative")
            s = d.sum(axis=0)
            if np.abs(s - 1.0).max() > 1e-5:
                raise ValueError("segmentation probabilities must sum to 1 per pixel")
        elif self.task == "depth":
            if d.shape[0] != 1:
                raise ShapeMismatchError("depth condition must have one channel")
            if np.any(d <= 0):
                raise ValueError("depth must be positive")
        else:
            if d.shape[0] != 3:
                raise ShapeMismatchError("normals condition must have three channels")
            norms = np.sqrt((d * d).sum(axis=0))
            if np.abs(norms - 1.0).max() > 1e-4:
                raise ValueError("normals must be unit length per pixel")
        return self


class SeededRng:
    """Deterministic random streams addressed by name.

    A stream is derived from the root seed plus a path of labels/ints, so
    consumers never share or advance each other's state. Deriving the same
    path twice yields the same stream, which is what makes redaction draws
    reconstructible at any (epoch, step) without checkpointing rng state.
    """

    def __init__(self, seed, _path=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        ints = [self.seed]
        for part in self._path:
            h = hashlib.sha256(repr(part).encode()).digest()
            ints.append(int.from_bytes(h[:8], "little"))
        self.gen = np.random.default_rng(np.random.SeedSequence(ints))

    def stream(self, *path):
        """Fresh generator for this (seed, *path) address."""
        return SeededRng(self.seed, self._path + path)

    # generator passthroughs
    def uniform(self, *a, **k):
        return self.gen.uniform(*a, **k)

    def integers(self, *a, **k):
        return self.gen.integers(*a, **k)

    def standard_normal(self, *a, **k):
        return self.gen.standard_normal(*a, **k)

    def normal(self, *a, **k):
        return self.gen.normal(*a, **k)

    def permutation(self, *a, **k):
        return self.gen.permutation(*a, **k)

    def random(self, *a, **k):
        return self.gen.random(*a, **k)


def make_rng(seed):
    return SeededRng(seed)


def load_image(path):
    """Read an 8-bit RGB raster into a (3,H,W) float64 tensor in [0,1]."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            raise ImageFormatError(f"expected 8-bit RGB, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageTensor(arr.transpose(2, 0, 1))


def quantize8(x):
    """Clamp to [0,1] and quantize to uint8 with round-half-up."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.floor(x * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path):
    """Write an image tensor as lossless 8-bit RGB PNG."""
    data = img.data if isinstance(img, ImageTensor) else np.asarray(img)
    if data.ndim != 3 or data.shape[0] != 3:
        raise ShapeMismatchError(f"expected (3,H,W), got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite image")
    arr = quantize8(data).transpose(1, 2, 0)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
