"""Flat key=value run configuration.

A config file is lines of `key = value` with `#` comments. Every key has a
typed schema entry with a default; unknown keys are hard errors, so typos
cannot silently fall back to defaults. Round-tripping text -> values ->
text is lossless at the semantic level (canonical ordering and rendering).
"""

from dataclasses import dataclass, field

import numpy as np

from ..core import ConfigError
from ..crm import CrmConfig, default_mode
from ..losses import LossWeights
from ..redaction import RedactionSpec, spec_from_config
from ..sa import SaConfig
from ..tasks import BaseNetConfig, SyntheticSceneSpec


def _bool(s):
    if isinstance(s, bool):
        return s
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected boolean, got {s!r}")


def _enum(*options):
    def parse(s):
        if s not in options:
            raise ConfigError(f"expected one of {options}, got {s!r}")
        return s

    return parse


# key -> (parser, default)
SCHEMA = {
    "task": (_enum("segmentation", "depth", "normals", "multitask"), "segmentation"),
    "seed": (int, 0),
    "data.image_size": (int, 64),
    "data.num_shapes": (int, 3),
    "data.shape_classes": (int, 3),
    "data.train": (int, 500),
    "data.val": (int, 100),
    "data.seed": (int, 0),
    "basenet.width": (int, 32),
    "basenet.levels": (int, 3),
    "basenet.classes": (int, 3),
    "redaction.domain": (_enum("spatial", "spectral"), "spatial"),
    "redaction.variant": (
        _enum("random", "checkerboard", "random_blocks", "lowpass", "highpass", "bandstop"),
        "random_blocks",
    ),
    "redaction.t": (float, 0.5),
    "redaction.b": (int, 4),
    "redaction.band_lo": (float, 0.2),
    "redaction.band_hi": (float, 0.6),
    "crm.mode": (_enum("auto", "forward", "recursive"), "auto"),
    "crm.combine": (_enum("multiply", "concat"), "concat"),
    "crm.width": (int, 64),
    "crm.depth": (int, 4),
    "crm.steps": (int, 4),
    "loss.gamma": (float, 0.1),
    "loss.gamma1": (float, 1.0),
    "loss.gamma2": (float, 1.0),
    "loss.gamma_text": (float, 0.05),
    "loss.gamma_cyc": (float, 0.05),
    "loss.use_text": (_bool, False),
    "loss.use_cyclic": (_bool, False),
    "sa.enabled": (_bool, False),
    "sa.patch": (int, 4),
    "sa.dim": (int, 64),
    "sa.heads": (int, 4),
    "sa.redaction.variant": (_enum("lowpass", "highpass", "bandstop"), "lowpass"),
    "sa.redaction.band_lo": (float, 0.0),
    "sa.redaction.band_hi": (float, 0.5),
    "optim.lr": (float, 1e-3),
    "optim.batch": (int, 8),
    "optim.epochs": (int, 30),
    "train.dtype": (_enum("float32", "float64"), "float32"),
}


def parse_config(text):
    """Parse config text into a TrainConfig. Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(val)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from e
    full = {k: d for k, (_, d) in SCHEMA.items()}
    full.update(values)
    return TrainConfig(full)


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_text(cfg):
    """Canonical serialization; parse(config_to_text(c)) == c."""
    return "\n".join(f"{k} = {_render(cfg.values[k])}" for k in SCHEMA) + "\n"


@dataclass
class TrainConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for k, (_, d) in SCHEMA.items():
            self.values.setdefault(k, d)
        # cross-field checks run via the constructors below
        self.scene_spec()
        self.basenet_config()
        self.redaction_spec()
        self.crm_config(self.basenet_config().condition_channels)
        self.loss_weights()
        if self.values["sa.enabled"]:
            self.sa_config()
        if (self.values["loss.use_text"] or self.values["loss.use_cyclic"]) and self.values[
            "loss.gamma"
        ] == 0.0:
            raise ConfigError("text/cyclic extensions need loss.gamma > 0 (no regeneration path)")
        if self.values["optim.batch"] < 1 or self.values["optim.epochs"] < 1:
            raise ConfigError("optim.batch and optim.epochs must be positive")
        size = self.values["data.image_size"]
        stride = 2 ** (self.values["basenet.levels"] - 1)
        if size % stride:
            raise ConfigError(f"data.image_size={size} not divisible by encoder stride {stride}")
        if self.values["sa.enabled"] and size % self.values["sa.patch"]:
            raise ConfigError(f"data.image_size={size} not divisible by sa.patch")

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, TrainConfig) and self.values == other.values

    def with_overrides(self, overrides):
        """New config with the given dotted keys replaced."""
        vals = dict(self.values)
        for key, v in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            vals[key] = v
        return TrainConfig(vals)

    def dtype(self):
        return np.float32 if self.values["train.dtype"] == "float32" else np.float64

    def scene_spec(self):
        s = self.values
        return SyntheticSceneSpec(
            image_size=(s["data.image_size"], s["data.image_size"]),
            num_shapes=s["data.num_shapes"],
            shape_classes=s["data.shape_classes"],
            seed=s["data.seed"],
            train=s["data.train"],
            val=s["data.val"],
        )

    def basenet_config(self):
        s = self.values
        return BaseNetConfig(
            task=s["task"],
            classes=s["basenet.classes"],
            width=s["basenet.width"],
            depth_levels=s["basenet.levels"],
        )

    def redaction_spec(self):
        s = self.values
        return spec_from_config(
            s["redaction.domain"],
            s["redaction.variant"],
            t=s["redaction.t"],
            b=s["redaction.b"],
            band_lo=s["redaction.band_lo"],
            band_hi=s["redaction.band_hi"],
        )

    def crm_config(self, condition_channels):
        s = self.values
        mode = s["crm.mode"]
        if mode == "auto":
            mode = default_mode(s["redaction.variant"])
        return CrmConfig(
            mode=mode,
            combine=s["crm.combine"],
            width=s["crm.width"],
            depth=s["crm.depth"],
            steps=s["crm.steps"],
            condition_channels=condition_channels,
        )

    def loss_weights(self):
        s = self.values
        return LossWeights(
            gamma=s["loss.gamma"],
            gamma1=s["loss.gamma1"],
            gamma2=s["loss.gamma2"],
            gamma_text=s["loss.gamma_text"] if s["loss.use_text"] else 0.0,
            gamma_cyc=s["loss.gamma_cyc"] if s["loss.use_cyclic"] else 0.0,
        )

    def sa_config(self):
        s = self.values
        spec = RedactionSpec(
            "spectral",
            s["sa.redaction.variant"],
            band=(s["sa.redaction.band_lo"], s["sa.redaction.band_hi"]),
        )
        return SaConfig(
            patch=s["sa.patch"], dim=s["sa.dim"], heads=s["sa.heads"], spectral_spec=spec
        )
