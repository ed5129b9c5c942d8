"""Flat key-value run configuration.

Config files are plain ``key = value`` lines ('#' starts a comment).
Dotted keys address nested fields (``weights.lambda_p = 100``).  Command
line overrides of the form ``key=value`` apply after file values, and
every run echoes its effective configuration so it can be reproduced
from the echo alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .losses import LossWeights


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config_file(path: Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def apply_overrides(values: dict[str, str], overrides: list[str]) -> dict[str, str]:
    out = dict(values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_config(values: dict[str, str]) -> str:
    return "\n".join(f"{k} = {values[k]}" for k in sorted(values)) + "\n"


def _coerce(name: str, value: str, kind: type):
    try:
        if kind is bool:
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"config key {name}: {exc}") from exc


@dataclass
class TrainConfig:
    """Everything the optimization loop needs, reproducible from a file."""

    epochs: int = 300
    batch_size: int = 32
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    lr_decay_start: int = 150
    n_critic: int = 5
    seed: int = 0
    checkpoint_every: int = 10
    gen_base_channels: int = 64
    disc_base_channels: int = 64
    n_residual_blocks: int = 6
    perceptual_width: float = 1.0
    perceptual_weights: str = ""  # path to serialized backbone weights, or empty
    manifest: str = ""
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.n_critic < 1:
            raise ConfigError("n_critic must be >= 1")
        if not 0 <= self.lr_decay_start <= self.epochs:
            raise ConfigError("lr_decay_start must lie in [0, epochs]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "TrainConfig":
        kwargs = {}
        weight_kwargs = {}
        simple = {f.name: f.type for f in fields(cls) if f.name != "weights"}
        kinds = {
            "epochs": int, "batch_size": int, "lr": float, "beta1": float,
            "beta2": float, "lr_decay_start": int, "n_critic": int, "seed": int,
            "checkpoint_every": int, "gen_base_channels": int,
            "disc_base_channels": int, "n_residual_blocks": int,
            "perceptual_width": float, "perceptual_weights": str, "manifest": str,
        }
        for key, value in values.items():
            if key.startswith("weights."):
                sub = key.split(".", 1)[1]
                if sub not in ("lambda_gp", "lambda_p", "lambda_gaze", "lambda_rec"):
                    raise ConfigError(f"unknown loss weight {key!r}")
                weight_kwargs[sub] = _coerce(key, value, float)
            elif key in simple:
                kwargs[key] = _coerce(key, value, kinds[key])
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            weights = LossWeights(**weight_kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(weights=weights, **kwargs)

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            if f.name == "weights":
                continue
            out[f.name] = str(getattr(self, f.name))
        for name in ("lambda_gp", "lambda_p", "lambda_gaze", "lambda_rec"):
            out[f"weights.{name}"] = str(getattr(self.weights, name))
        return out


def load_train_config(
    path: Optional[Path], overrides: Optional[list[str]] = None
) -> TrainConfig:
    values = load_config_file(path) if path else {}
    values = apply_overrides(values, overrides or [])
    return TrainConfig.from_mapping(values)


def echo_effective_config(config: TrainConfig, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "effective_config.txt"
    path.write_text(format_config(config.to_mapping()))
    return path
