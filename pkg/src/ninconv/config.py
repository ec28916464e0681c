"""Flat ``key = value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .inception import VARIANT_TAGS, ArchitectureSpec
from .losses import NORMALIZATIONS
from .optim import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    task: str = "skin"
    variant: str = "with_7x7"
    n_inception: int = 8
    depth: int = 0  # 0: derived from n_inception
    width: int = 64
    n_classes: int = 2
    lr: float = 0.001
    weight_decay: float = 0.0002
    decay_biases: bool = False
    batch_size: int = 8
    max_steps: int = 1000
    checkpoint_every: int = 1000
    seed: int = 0
    init: str = "uniform"
    loss_normalization: str = "per_pixel"
    patch_stride: int = 20
    train_manifest: str | None = None
    eval_manifest: str | None = None
    output_dir: str = "run"

    def __post_init__(self):
        if self.task not in ("skin", "segmentation", "restoration"):
            raise ConfigError(f"task: unknown task {self.task!r}")
        if self.variant not in VARIANT_TAGS:
            raise ConfigError(f"variant: must be one of {', '.join(VARIANT_TAGS)}")
        if self.init not in ("uniform", "zeros"):
            raise ConfigError("init: must be 'uniform' or 'zeros'")
        if self.loss_normalization not in NORMALIZATIONS:
            raise ConfigError(f"loss_normalization: must be one of {NORMALIZATIONS}")
        if self.depth:
            if self.depth < 4 or self.depth % 2:
                raise ConfigError("depth: must equal 4 + 2 * n_inception")
            self.n_inception = (self.depth - 4) // 2
        self.depth = 4 + 2 * self.n_inception

    def architecture(self) -> ArchitectureSpec:
        return ArchitectureSpec(
            task=self.task,
            n_inception=self.n_inception,
            variant=self.variant,
            width=self.width,
            n_classes=self.n_classes,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            max_steps=self.max_steps,
            seed=self.seed,
            loss_kind=self.architecture().loss_kind,
            loss_normalization=self.loss_normalization,
            decay_biases=self.decay_biases,
        )


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PATH_KEYS = ("train_manifest", "eval_manifest", "output_dir")


def _convert(key: str, text: str):
    kind = _TYPES[key]
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        return _bool(text)
    return text


def parse_config(text: str, base_dir: str | Path = ".", name: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines. ``#`` starts a comment; relative paths
    resolve against ``base_dir``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{name}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{name}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"{name}:{lineno}: {key}: {exc}") from None
    for key in _PATH_KEYS:
        if key in values and not Path(values[key]).is_absolute():
            values[key] = str(Path(base_dir) / values[key])
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.resolve().parent, str(path))
