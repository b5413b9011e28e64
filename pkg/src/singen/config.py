"""Run configuration: dataclasses, flat key-value (de)serialization, config hash.

The on-disk config format is a flat JSON object so that every key has an
obvious CLI flag equivalent. Internally the keys are grouped into the
dataclasses below.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration value; message names the offending field."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class PyramidConfig:
    """Geometry of the scale hierarchy.

    min_size bounds the coarsest level's shorter side from below, max_size
    caps the finest level's longer side, and scale_factor_r is the per-level
    shrink ratio. scales_cap optionally truncates the level list from the
    coarse end (desk-scale/CI override; relaxes the coarsest-side bound).
    """

    min_size: int = 25
    max_size: int = 250
    scale_factor_r: float = 0.75
    scales_cap: int | None = None

    def __post_init__(self) -> None:
        _require(0.0 < self.scale_factor_r < 1.0,
                 f"scale_factor_r must be in (0, 1), got {self.scale_factor_r}")
        _require(self.min_size >= 8, f"min_size must be >= 8, got {self.min_size}")
        _require(self.max_size >= self.min_size,
                 f"max_size ({self.max_size}) must be >= min_size ({self.min_size})")
        if self.scales_cap is not None:
            _require(self.scales_cap >= 2, f"scales_cap must be >= 2, got {self.scales_cap}")


@dataclass(frozen=True)
class SAConfig:
    """Self-attention placement and geometry.

    m is the fixed spatial size the block downsamples to before computing
    attention, k the number of coarsest scales carrying attention, and
    layer_indices the conv-block positions (head = 0) inside each generator
    and discriminator that get an attention block appended.
    """

    m: int = 16
    channel_reduction: int = 8
    k: int = 3
    layer_indices: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self) -> None:
        _require(self.m >= 2, f"m must be >= 2, got {self.m}")
        _require(self.channel_reduction >= 1,
                 f"channel_reduction must be >= 1, got {self.channel_reduction}")
        _require(self.k >= 1, f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "layer_indices", tuple(sorted(set(self.layer_indices))))
        _require(len(self.layer_indices) > 0, "layer_indices must not be empty")
        _require(all(i >= 0 for i in self.layer_indices),
                 f"layer_indices must be non-negative, got {self.layer_indices}")

    def reduced_channels(self, channels: int) -> int:
        return max(1, channels // self.channel_reduction)


@dataclass(frozen=True)
class SmoothingSpec:
    """Bounds for the random blur std fed to the discriminator at attention
    scales, plus the fixed std used for reconstruction targets.

    sigma_rec left as None means "midpoint of [sigma_min, sigma_max]",
    re-derived whenever the bounds change.
    """

    sigma_min: float = 1.0
    sigma_max: float = 3.0
    sigma_rec: float | None = None

    def __post_init__(self) -> None:
        _require(self.sigma_min > 0, f"sigma_min must be > 0, got {self.sigma_min}")
        _require(self.sigma_min <= self.sigma_max,
                 f"sigma_min ({self.sigma_min}) must be <= sigma_max ({self.sigma_max})")
        if self.sigma_rec is not None:
            _require(self.sigma_min <= self.sigma_rec <= self.sigma_max,
                     f"sigma_rec ({self.sigma_rec}) must lie in "
                     f"[{self.sigma_min}, {self.sigma_max}]")

    @property
    def sigma_rec_resolved(self) -> float:
        if self.sigma_rec is not None:
            return self.sigma_rec
        return (self.sigma_min + self.sigma_max) / 2.0


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 10.0
    lambda_gp: float = 0.1

    def __post_init__(self) -> None:
        _require(self.alpha >= 0, f"alpha must be >= 0, got {self.alpha}")
        _require(self.lambda_gp >= 0, f"lambda_gp must be >= 0, got {self.lambda_gp}")


@dataclass(frozen=True)
class ModelConfig:
    """Per-scale network shape. num_blocks counts conv layers including the
    head and the tail; channels double every channel_growth_every scales
    trained (capped), counting from the coarsest."""

    num_blocks: int = 5
    base_channels: int = 32
    channel_growth_every: int = 4
    max_channels: int = 128
    leaky_relu_slope: float = 0.2
    feedback: bool = True

    def __post_init__(self) -> None:
        _require(self.num_blocks >= 3, f"num_blocks must be >= 3, got {self.num_blocks}")
        _require(self.base_channels >= 1,
                 f"base_channels must be >= 1, got {self.base_channels}")
        _require(self.channel_growth_every >= 1,
                 f"channel_growth_every must be >= 1, got {self.channel_growth_every}")
        _require(self.max_channels >= self.base_channels,
                 "max_channels must be >= base_channels")

    def channels_at(self, scale_index: int, coarsest_index: int) -> int:
        """Trunk width at scale `scale_index` (0 = finest)."""
        grown = self.base_channels * 2 ** ((coarsest_index - scale_index)
                                           // self.channel_growth_every)
        return min(grown, self.max_channels)

    @property
    def sa_positions(self) -> tuple[int, ...]:
        """Valid conv-block positions for attention: everything but the tail."""
        return tuple(range(self.num_blocks - 1))

    @property
    def min_input_size(self) -> int:
        """Receptive field of the stacked 3x3 convs; smaller inputs are rejected."""
        return 2 * self.num_blocks + 1


@dataclass(frozen=True)
class TrainConfig:
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    epochs: int = 6000
    g_steps: int = 1
    d_steps: int = 1
    seed: int = 0
    beta1: float = 0.5
    beta2: float = 0.999
    lr_milestone_frac: float = 0.8
    lr_gamma: float = 0.1
    base_noise_amp: float = 0.1

    def __post_init__(self) -> None:
        _require(self.lr_g > 0, f"lr_g must be > 0, got {self.lr_g}")
        _require(self.lr_d > 0, f"lr_d must be > 0, got {self.lr_d}")
        _require(self.epochs >= 1, f"epochs must be >= 1, got {self.epochs}")
        _require(self.g_steps >= 1 and self.d_steps >= 1,
                 "g_steps and d_steps must be >= 1")
        _require(0.0 < self.lr_milestone_frac <= 1.0,
                 "lr_milestone_frac must be in (0, 1]")
        _require(self.base_noise_amp > 0, "base_noise_amp must be > 0")


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run needs, grouped; serialized flat."""

    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    sa: SAConfig = field(default_factory=SAConfig)
    smoothing: SmoothingSpec = field(default_factory=SmoothingSpec)
    loss: LossConfig = field(default_factory=LossConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        bad = [i for i in self.sa.layer_indices if i not in self.model.sa_positions]
        _require(not bad,
                 f"layer_indices {bad} out of range; attention may attach to conv "
                 f"blocks {self.model.sa_positions} (the tail is excluded)")

    _GROUPS = ("pyramid", "sa", "smoothing", "loss", "model", "train")

    def to_flat_dict(self) -> dict:
        flat: dict = {}
        for group in self._GROUPS:
            for f in dataclasses.fields(getattr(self, group)):
                value = getattr(getattr(self, group), f.name)
                flat[f.name] = list(value) if isinstance(value, tuple) else value
        return flat

    @classmethod
    def from_flat_dict(cls, flat: dict) -> "RunConfig":
        flat = dict(flat)
        kwargs = {}
        for group in cls._GROUPS:
            group_cls = cls.__dataclass_fields__[group].default_factory
            names = {f.name for f in dataclasses.fields(group_cls)}
            picked = {k: flat.pop(k) for k in list(flat) if k in names}
            if "layer_indices" in picked:
                picked["layer_indices"] = tuple(picked["layer_indices"])
            kwargs[group] = group_cls(**picked)
        _require(not flat, f"unknown config keys: {sorted(flat)}")
        return cls(**kwargs)

    def replace(self, **flat_overrides) -> "RunConfig":
        merged = self.to_flat_dict()
        for key, value in flat_overrides.items():
            _require(key in merged, f"unknown config key: {key}")
            if value is not None:
                merged[key] = value
        return RunConfig.from_flat_dict(merged)

    def to_json(self) -> str:
        return json.dumps(self.to_flat_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            flat = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        _require(isinstance(flat, dict), "config JSON must be an object")
        return cls.from_flat_dict(flat)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_flat_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]
