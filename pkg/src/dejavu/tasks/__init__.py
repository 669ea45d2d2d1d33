"""Dense-prediction tasks: base networks, losses, metrics, synthetic data."""

from .basenet import BaseNet, BaseNetConfig, basenet_forward
from .supervision import (MetricSet, base_loss, compute_metrics, multitask_loss,
                          stack_ground_truths)
from .synthetic import (GroundTruth, SyntheticSceneSpec, generate_synthetic_dataset,
                        load_dataset, render_scene, save_dataset)

__all__ = [
    "BaseNet",
    "BaseNetConfig",
    "basenet_forward",
    "MetricSet",
    "base_loss",
    "compute_metrics",
    "multitask_loss",
    "stack_ground_truths",
    "GroundTruth",
    "SyntheticSceneSpec",
    "generate_synthetic_dataset",
    "load_dataset",
    "render_scene",
    "save_dataset",
]
