"""Per-task training losses and evaluation metrics.

Losses run on autodiff tensors and respect the validity mask. Metrics are
plain numpy on detached predictions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..autodiff import Tensor, absolute, as_tensor, log, mul, tsum
from ..core import ShapeMismatchError


def stack_ground_truths(gts):
    """List of GroundTruth -> dict of batched arrays."""
    return {
        "seg": np.stack([g.seg for g in gts]),
        "depth": np.stack([g.depth for g in gts]),
        "normals": np.stack([g.normals for g in gts]),
        "valid": np.stack([g.valid for g in gts]),
    }


def _batched(cond, gt):
    cond = as_tensor(cond)
    if cond.ndim == 3:
        cond = cond.reshape((1,) + cond.shape)
    if not isinstance(gt, dict):
        gt = stack_ground_truths([gt])
    if cond.shape[0] != gt["valid"].shape[0] or cond.shape[2:] != gt["valid"].shape[1:]:
        raise ShapeMismatchError(f"condition {cond.shape} vs mask {gt['valid'].shape}")
    return cond, gt


def _masked_mean(per_pixel, valid):
    """Mean of (B,H,W) tensor over pixels where valid is 1."""
    total = float(valid.sum())
    if total == 0:
        raise ValueError("validity mask excludes every pixel; loss undefined")
    return tsum(mul(per_pixel, Tensor(valid.astype(per_pixel.dtype)))) / total


def base_loss(cond, gt, task):
    """Supervised loss on valid pixels.

    segmentation: cross-entropy on the probability map
    depth: mean absolute error
    normals: mean (1 - cosine similarity)
    """
    cond, gt = _batched(cond, gt)
    valid = gt["valid"]
    if task == "segmentation":
        labels = gt["seg"].astype(np.int64)
        n_cls = cond.shape[1]
        if labels.max() >= n_cls:
            raise ShapeMismatchError(f"label {labels.max()} outside {n_cls} classes")
        onehot = np.zeros(cond.shape, dtype=cond.dtype)
        b, h, w = labels.shape
        bi, hi, wi = np.ogrid[:b, :h, :w]
        onehot[bi, labels, hi, wi] = 1.0
        p_target = tsum(mul(cond, Tensor(onehot)), axis=1)
        return _masked_mean(-log(p_target), valid)
    if task == "depth":
        d = gt["depth"].astype(cond.dtype)
        return _masked_mean(tsum(absolute(cond - Tensor(d)), axis=1), valid)
    if task == "normals":
        n = gt["normals"].astype(cond.dtype)
        cos = tsum(mul(cond, Tensor(n)), axis=1)
        return _masked_mean(1.0 - cos, valid)
    raise ValueError(f"unknown task {task!r}")


def multitask_loss(conds, gt, tasks):
    total = None
    for t in tasks:
        term = base_loss(conds[t], gt, t)
        total = term if total is None else total + term
    return total


@dataclass
class MetricSet:
    """Only the evaluated task's fields are populated."""

    miou: Optional[float] = None
    a_err: Optional[float] = None
    abs_rel: Optional[float] = None
    sq_rel: Optional[float] = None
    delta1: Optional[float] = None
    m_err_deg: Optional[float] = None

    def items(self):
        for k in ("miou", "a_err", "abs_rel", "sq_rel", "delta1", "m_err_deg"):
            v = getattr(self, k)
            if v is not None:
                yield k, v


def _data(cond):
    if isinstance(cond, Tensor):
        cond = cond.data
    cond = np.asarray(cond)
    return cond[None] if cond.ndim == 3 else cond


def compute_metrics(cond, gt, task):
    """Evaluate one task over a batch, restricted to valid pixels.

    mIoU uses argmax labels and skips classes absent from both prediction
    and ground truth. Depth metrics are relative errors plus the delta1
    inlier rate at ratio 1.25. Normal error is the mean angle in degrees.
    """
    pred = _data(cond)
    if not isinstance(gt, dict):
        gt = stack_ground_truths([gt])
    valid = gt["valid"].astype(bool)
    if not valid.any():
        raise ValueError("validity mask excludes every pixel; metrics undefined")
    if task == "segmentation":
        labels = gt["seg"].astype(np.int64)
        hard = pred.argmax(axis=1)
        p, g = hard[valid], labels[valid]
        n_cls = pred.shape[1]
        ious = []
        for c in range(n_cls):
            pc, gc = p == c, g == c
            union = np.logical_or(pc, gc).sum()
            if union == 0:
                continue
            ious.append(np.logical_and(pc, gc).sum() / union)
        return MetricSet(miou=float(np.mean(ious)))
    if task == "depth":
        d_hat = pred[:, 0][valid]
        d = gt["depth"][:, 0][valid]
        rel = np.abs(d_hat - d) / d
        ratio = np.maximum(d_hat / d, d / d_hat)
        return MetricSet(
            a_err=float(rel.mean()),
            abs_rel=float(rel.mean()),
            sq_rel=float(((d_hat - d) ** 2 / d).mean()),
            delta1=float((ratio < 1.25).mean()),
        )
    if task == "normals":
        n_hat = np.moveaxis(pred, 1, -1)[valid]
        n = np.moveaxis(gt["normals"], 1, -1)[valid]
        dot = np.clip((n_hat * n).sum(axis=-1), -1.0, 1.0)
        return MetricSet(m_err_deg=float(np.degrees(np.arccos(dot)).mean()))
    raise ValueError(f"unknown task {task!r}")
