"""Analytic synthetic scenes: spheres and boxes on a ground plane.

Orthographic camera looking down +z onto a 4x4 world-unit canvas; the
ground plane sits at z=4 and shapes protrude toward the camera (smaller z
is closer). Spheres are half-embedded in the plane, so the visible surface
is z = plane_z - sqrt(r^2 - rho^2) and the apex depth is plane_z - r.
Boxes are axis-aligned and show only their flat top face.

Ground truth is exact: class labels (0 plane, 1 sphere, 2 box), z-buffer
depth, and surface normals stored in the (-dz/dx, -dz/dy, 1)-normalized
convention, so the plane and sphere apex both read (0,0,1). The validity
mask drops a one-pixel band around silhouettes where normals jump.

A dataset is a directory of PNG images paired with .npz ground-truth
tensors plus manifest.json; see save_dataset for the schema.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import ImageTensor, InvalidSpecError, SeededRng, load_image, save_image

PLANE_Z = 4.0
EXTENT = 4.0
LIGHT = np.array([0.4, -0.3, 0.8]) / np.linalg.norm([0.4, -0.3, 0.8])


@dataclass
class SyntheticSceneSpec:
    image_size: tuple = (64, 64)
    num_shapes: int = 3
    shape_classes: int = 3
    seed: int = 0
    train: int = 500
    val: int = 100

    def __post_init__(self):
        h, w = self.image_size
        if h < 8 or w < 8:
            raise InvalidSpecError("image_size must be at least 8x8")
        if self.num_shapes < 0:
            raise InvalidSpecError("num_shapes must be >= 0")
        if self.shape_classes not in (2, 3):
            raise InvalidSpecError("shape_classes must be 2 (spheres) or 3 (+boxes)")
        if self.train < 1 or self.val < 1:
            raise InvalidSpecError("split sizes must be positive")


@dataclass
class GroundTruth:
    seg: np.ndarray      # (H,W) int labels
    depth: np.ndarray    # (1,H,W) positive
    normals: np.ndarray  # (3,H,W) unit vectors
    valid: np.ndarray    # (H,W) {0,1}

    def validate(self):
        v = self.valid.astype(bool)
        if self.seg.min() < 0:
            raise ValueError("negative label")
        if np.any(self.depth[0][v] <= 0):
            raise ValueError("non-positive depth on valid pixel")
        norms = np.sqrt((self.normals**2).sum(axis=0))
        if v.any() and np.abs(norms[v] - 1.0).max() > 1e-4:
            raise ValueError("non-unit normal on valid pixel")
        return self


def _world_grid(h, w):
    y = (np.arange(h) + 0.5) * (EXTENT / h)
    x = (np.arange(w) + 0.5) * (EXTENT / w)
    return np.meshgrid(y, x, indexing="ij")


def render_scene(shapes, h, w, colors, bg_color):
    """Z-buffer rendering of explicit shape descriptors.

    shapes: list of dicts; {"kind": "sphere", "cx", "cy", "r"} or
    {"kind": "box", "x0", "x1", "y0", "y1", "z_top"}. colors: one RGB
    triple in [0,1] per shape.
    """
    yy, xx = _world_grid(h, w)
    z = np.full((h, w), PLANE_Z)
    label = np.zeros((h, w), dtype=np.int64)
    shape_id = np.zeros((h, w), dtype=np.int64)
    normals = np.zeros((3, h, w))
    normals[2] = 1.0
    color = np.empty((3, h, w))
    color[:] = np.asarray(bg_color)[:, None, None]

    for k, s in enumerate(shapes):
        if s["kind"] == "sphere":
            dx, dy, r = xx - s["cx"], yy - s["cy"], s["r"]
            rho2 = dx * dx + dy * dy
            inside = rho2 < r * r
            sagitta = np.sqrt(np.maximum(r * r - rho2, 0.0))
            z_s = PLANE_Z - sagitta
            hit = inside & (z_s < z)
            z[hit] = z_s[hit]
            label[hit] = 1
            shape_id[hit] = k + 1
            normals[0][hit] = -dx[hit] / r
            normals[1][hit] = -dy[hit] / r
            normals[2][hit] = sagitta[hit] / r
            color[:, hit] = np.asarray(colors[k])[:, None]
        elif s["kind"] == "box":
            inside = (xx >= s["x0"]) & (xx < s["x1"]) & (yy >= s["y0"]) & (yy < s["y1"])
            hit = inside & (s["z_top"] < z)
            z[hit] = s["z_top"]
            label[hit] = 2
            shape_id[hit] = k + 1
            normals[0][hit] = 0.0
            normals[1][hit] = 0.0
            normals[2][hit] = 1.0
            color[:, hit] = np.asarray(colors[k])[:, None]
        else:
            raise InvalidSpecError(f"unknown shape kind {s['kind']!r}")

    lam = np.clip(np.einsum("c,chw->hw", LIGHT, normals), 0.0, 1.0)
    shade = 0.35 + 0.65 * lam
    attenuation = 0.82 + 0.18 * (PLANE_Z - z) / PLANE_Z
    img = np.clip(color * (shade * attenuation)[None], 0.0, 1.0)

    valid = np.ones((h, w))
    edges = np.zeros((h, w), dtype=bool)
    edges[:-1] |= shape_id[:-1] != shape_id[1:]
    edges[1:] |= shape_id[1:] != shape_id[:-1]
    edges[:, :-1] |= shape_id[:, :-1] != shape_id[:, 1:]
    edges[:, 1:] |= shape_id[:, 1:] != shape_id[:, :-1]
    valid[edges] = 0.0

    gt = GroundTruth(seg=label, depth=z[None], normals=normals, valid=valid)
    return ImageTensor(img), gt.validate()


def sample_scene(spec, rng):
    """Draw shapes and colors for one scene from the given stream."""
    shapes, colors = [], []
    h, w = spec.image_size
    for _ in range(spec.num_shapes):
        if spec.shape_classes == 3 and rng.random() < 0.5:
            bw = rng.uniform(0.7, 1.8)
            bh = rng.uniform(0.7, 1.8)
            shapes.append({
                "kind": "box",
                "x0": (x0 := rng.uniform(0.2, EXTENT - bw - 0.2)),
                "x1": x0 + bw,
                "y0": (y0 := rng.uniform(0.2, EXTENT - bh - 0.2)),
                "y1": y0 + bh,
                "z_top": PLANE_Z - rng.uniform(0.4, 1.5),
            })
        else:
            r = rng.uniform(0.45, 1.0)
            shapes.append({
                "kind": "sphere",
                "cx": rng.uniform(r + 0.2, EXTENT - r - 0.2),
                "cy": rng.uniform(r + 0.2, EXTENT - r - 0.2),
                "r": r,
            })
        colors.append(rng.uniform(0.25, 0.95, 3))
    bg = rng.uniform(0.15, 0.6, 3)
    return shapes, colors, bg


def make_scene(spec, split, idx):
    rng = SeededRng(spec.seed).stream("scene", split, idx)
    shapes, colors, bg = sample_scene(spec, rng)
    h, w = spec.image_size
    return render_scene(shapes, h, w, colors, bg)


def generate_synthetic_dataset(spec, split="train"):
    if split not in ("train", "val"):
        raise InvalidSpecError(f"unknown split {split!r}")
    n = spec.train if split == "train" else spec.val
    return [make_scene(spec, split, i) for i in range(n)]


def save_dataset(out_dir, spec):
    """Persist both splits.

    Layout: images/<split>_<idx>.png (8-bit RGB), gt/<split>_<idx>.npz
    (seg int16 (H,W); depth float32 (1,H,W); normals float32 (3,H,W);
    valid uint8 (H,W)), manifest.json with the scene parameters and file
    listing.
    PNG images are quantized; training regenerates scenes in memory, this
    layout is the inspection/export format.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    manifest = {
        "image_size": list(spec.image_size),
        "num_shapes": spec.num_shapes,
        "shape_classes": spec.shape_classes,
        "seed": spec.seed,
        "splits": {"train": spec.train, "val": spec.val},
        "files": [],
    }
    for split in ("train", "val"):
        for i, (img, gt) in enumerate(generate_synthetic_dataset(spec, split)):
            stem = f"{split}_{i:05d}"
            save_image(img, out / "images" / f"{stem}.png")
            np.savez_compressed(
                out / "gt" / f"{stem}.npz",
                seg=gt.seg.astype(np.int16),
                depth=gt.depth.astype(np.float32),
                normals=gt.normals.astype(np.float32),
                valid=gt.valid.astype(np.uint8),
            )
            manifest["files"].append({
                "split": split,
                "index": i,
                "image": f"images/{stem}.png",
                "gt": f"gt/{stem}.npz",
            })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out / "manifest.json"


def load_dataset(root):
    """Read a saved dataset back into {split: [(ImageTensor, GroundTruth)]}."""
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    out = {"train": [], "val": []}
    for entry in manifest["files"]:
        img = load_image(root / entry["image"])
        with np.load(root / entry["gt"]) as z:
            gt = GroundTruth(
                seg=z["seg"].astype(np.int64),
                depth=z["depth"].astype(np.float64),
                normals=z["normals"].astype(np.float64),
                valid=z["valid"].astype(np.float64),
            )
        out[entry["split"]].append((img, gt))
    return out, manifest
