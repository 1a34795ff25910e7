"""Training configuration: YAML presets validated into a dataclass."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

SHUFFLE_MODES = ("per-epoch", "once", "off")


class ConfigError(ValueError):
    pass


@dataclass
class TinySpec:
    """Architecture of the built-in randomly initialized encoder."""

    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    intermediate_size: int = 128


@dataclass
class TrainConfig:
    model: str = "tiny-random"
    epochs: int = 15
    learning_rate: float = 2e-5
    batch_size: int = 16
    weight_decay: float = 0.01
    patience: int = 3
    focal_gamma: float = 2.0
    class_weights: object = "train"  # "train" | "none" | [w_obj, w_subj]
    max_grad_norm: float = 1.0
    mixed_precision: bool = False
    seed: int = 42
    max_length: int = 256
    shuffle: str = "per-epoch"
    tiny: TinySpec = field(default_factory=TinySpec)

    def __post_init__(self) -> None:
        for name in ("epochs", "learning_rate", "batch_size", "max_grad_norm", "max_length"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.focal_gamma < 0:
            raise ConfigError(f"focal_gamma must be >= 0, got {self.focal_gamma}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.shuffle not in SHUFFLE_MODES:
            raise ConfigError(f"shuffle must be one of {SHUFFLE_MODES}, got {self.shuffle!r}")
        if isinstance(self.class_weights, (list, tuple)):
            if len(self.class_weights) != 2 or any(w <= 0 for w in self.class_weights):
                raise ConfigError(f"explicit class_weights need two positive values, got {self.class_weights}")
        elif self.class_weights not in ("train", "none"):
            raise ConfigError(f"class_weights must be 'train', 'none', or a pair, got {self.class_weights!r}")


def load_config(path: str | Path) -> TrainConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    tiny = TinySpec(**raw.pop("tiny", {}))
    known = {f for f in TrainConfig.__dataclass_fields__ if f != "tiny"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    return TrainConfig(tiny=tiny, **raw)
