"""Training orchestration: config, loops, experiments, CLI."""

from .config import TrainConfig, config_to_text, load_config, parse_config
from .experiments import ablate_redaction, band_sweep, sa_scaling
from .train import (RunRecord, TrainState, evaluate, evaluate_checkpoint,
                    make_state, restore_state, train, train_step)

__all__ = [
    "TrainConfig",
    "config_to_text",
    "load_config",
    "parse_config",
    "ablate_redaction",
    "band_sweep",
    "sa_scaling",
    "RunRecord",
    "TrainState",
    "evaluate",
    "evaluate_checkpoint",
    "make_state",
    "restore_state",
    "train",
    "train_step",
]
