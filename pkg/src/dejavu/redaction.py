"""Image redaction: spatial masking and spectral (DCT) filtering.

Spatial variants drop pixels (independent dropout, checkerboard blocks, a
randomly shifted checkerboard). Spectral variants zero DCT coefficients by
normalized radial frequency and invert the transform, so the result stays
real-valued and unclamped. Both families are linear in the image.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.fft

from .core import ImageTensor, InvalidSpecError, ShapeMismatchError

SPATIAL_VARIANTS = ("random", "checkerboard", "random_blocks")
SPECTRAL_VARIANTS = ("lowpass", "highpass", "bandstop")


@dataclass
class RedactionSpec:
    """Validated description of one redaction transform.

    Exactly the fields relevant to (domain, variant) may be set:
    t for spatial random, b for the block variants, band for spectral.
    """

    domain: str
    variant: str
    t: Optional[float] = None
    b: Optional[int] = None
    band: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.domain not in ("spatial", "spectral"):
            raise InvalidSpecError(f"unknown domain {self.domain!r}")
        allowed = SPATIAL_VARIANTS if self.domain == "spatial" else SPECTRAL_VARIANTS
        if self.variant not in allowed:
            raise InvalidSpecError(
                f"variant {self.variant!r} invalid for domain {self.domain!r}"
            )
        need_t = self.domain == "spatial" and self.variant == "random"
        need_b = self.domain == "spatial" and self.variant in ("checkerboard", "random_blocks")
        need_band = self.domain == "spectral"
        if need_t:
            if self.t is None:
                raise InvalidSpecError("spatial random requires drop probability t")
            if not 0.0 <= self.t <= 1.0:
                raise InvalidSpecError(f"t={self.t} outside [0,1]")
        elif self.t is not None:
            raise InvalidSpecError(f"t is not a parameter of {self.variant}")
        if need_b:
            if self.b is None:
                raise InvalidSpecError(f"{self.variant} requires block size b")
            if int(self.b) != self.b or self.b < 1:
                raise InvalidSpecError(f"b={self.b} must be a positive integer")
            self.b = int(self.b)
        elif self.b is not None:
            raise InvalidSpecError(f"b is not a parameter of {self.variant}")
        if need_band:
            if self.band is None:
                raise InvalidSpecError("spectral redaction requires band=(f_lo,f_hi)")
            lo, hi = self.band
            if not (0.0 <= lo < hi <= 1.0):
                raise InvalidSpecError(f"band=({lo},{hi}) must satisfy 0 <= f_lo < f_hi <= 1")
            self.band = (float(lo), float(hi))
        elif self.band is not None:
            raise InvalidSpecError("band is only a parameter of spectral redaction")


def make_spatial_mask(h, w, spec, rng):
    """Binary (H,W) keep-mask for a spatial redaction spec.

    checkerboard keeps the top-left b-block; random_blocks shifts the same
    grid by an offset drawn uniformly from [0, 2b)^2.
    """
    if spec.domain != "spatial":
        raise InvalidSpecError("make_spatial_mask needs a spatial spec")
    if spec.variant == "random":
        return (rng.random((h, w)) >= spec.t).astype(np.float64)
    b = spec.b
    if b > min(h, w):
        raise InvalidSpecError(f"block size {b} exceeds image side {min(h, w)}")
    if spec.variant == "checkerboard":
        oy = ox = 0
    else:
        oy = int(rng.integers(0, 2 * b))
        ox = int(rng.integers(0, 2 * b))
    ii = (np.arange(h)[:, None] + oy) // b
    jj = (np.arange(w)[None, :] + ox) // b
    return (((ii + jj) % 2) == 0).astype(np.float64)


def apply_spatial_mask(img, mask):
    """Zero masked pixels; kept pixels pass through bit-identically."""
    data = img.data if isinstance(img, ImageTensor) else np.asarray(img)
    mask = np.asarray(mask)
    if mask.shape != data.shape[-2:]:
        raise ShapeMismatchError(f"mask {mask.shape} vs image {data.shape}")
    out = np.where(mask[None, :, :] != 0, data, 0.0)
    return ImageTensor(out) if isinstance(img, ImageTensor) else out


def dct2(img):
    """Orthonormal type-II DCT along the two spatial axes, per channel."""
    data = img.data if isinstance(img, ImageTensor) else np.asarray(img)
    return scipy.fft.dctn(data, type=2, axes=(-2, -1), norm="ortho")


def idct2(coef):
    """Inverse of dct2. No clamping; output can leave [0,1]."""
    return scipy.fft.idctn(np.asarray(coef), type=2, axes=(-2, -1), norm="ortho")


def radial_index(h, w):
    """Normalized radial frequency r(u,v) = |(u,v)| / |(H-1,W-1)| on the DCT grid."""
    uu = np.arange(h, dtype=np.float64)[:, None]
    vv = np.arange(w, dtype=np.float64)[None, :]
    denom = np.sqrt((h - 1) ** 2 + (w - 1) ** 2)
    return np.sqrt(uu * uu + vv * vv) / denom


def make_spectral_mask(h, w, spec):
    """Binary keep-mask over the DCT grid for lowpass/highpass/bandstop."""
    if spec.domain != "spectral":
        raise InvalidSpecError("make_spectral_mask needs a spectral spec")
    r = radial_index(h, w)
    lo, hi = spec.band
    if spec.variant == "lowpass":
        keep = r <= hi
    elif spec.variant == "highpass":
        keep = r >= lo
    else:
        keep = ~((r >= lo) & (r <= hi))
    return keep.astype(np.float64)


def redact(img, spec, rng=None):
    """Apply one redaction transform to an image.

    Spatial output has masked pixels exactly zero; spectral output is the
    unclamped inverse transform of the filtered coefficients.
    """
    data = img.data if isinstance(img, ImageTensor) else np.asarray(img)
    h, w = data.shape[-2:]
    if spec.domain == "spatial":
        mask = make_spatial_mask(h, w, spec, rng)
        out = apply_spatial_mask(data, mask)
    else:
        mask = make_spectral_mask(h, w, spec)
        out = idct2(mask[None, :, :] * dct2(data))
    return ImageTensor(out) if isinstance(img, ImageTensor) else out


def spec_from_config(domain, variant, t=None, b=None, band_lo=None, band_hi=None):
    """Build a RedactionSpec from flat config values, passing through only
    the fields the variant needs so validation stays strict."""
    if domain == "spatial":
        if variant == "random":
            return RedactionSpec(domain, variant, t=t)
        return RedactionSpec(domain, variant, b=b)
    if band_lo is None or band_hi is None:
        raise InvalidSpecError("spectral redaction requires band_lo and band_hi")
    return RedactionSpec(domain, variant, band=(band_lo, band_hi))
