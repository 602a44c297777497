"""Flat run configuration: canonical keys, JSON round trip, validation."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .losses import ContrastConfig, DistanceKind
from .data import ToyDatasetSpec

LOSS_TERMS = ("task", "kd", "fd", "afdcd")
VARIANTS = ("sc", "cc", "oc")


@dataclass
class RunConfig:
    seed: int = 0
    image_size: int = 32
    num_classes: int = 4
    train_count: int = 512
    val_count: int = 128
    noise_std: float = 0.05
    teacher_layers: int = 4
    teacher_channels: int = 32
    student_layers: int = 2
    student_channels: int = 8
    teacher_iterations: int = 300
    iterations: int = 200
    batch_size: int = 8
    lr: float = 0.02
    momentum: float = 0.9
    loss_terms: list[str] = field(default_factory=lambda: ["task", "kd", "fd", "afdcd"])
    afdcd_variant: str = "oc"
    tau: float = 0.07
    channel_groups: int = 16
    patch_side: int = 4
    pool_factor: int = 4
    distance: str = "l2"
    include_positive_in_denominator: bool = False
    lambda1: float = 1.0
    lambda2: float = 2e-5
    lambda3: float = 5e-3
    kd_temperature: float = 4.0
    mask_ratio: float = 0.75
    mask_method: str = "bernoulli"
    out_dir: str | None = None

    def dataset_spec(self) -> ToyDatasetSpec:
        return ToyDatasetSpec(
            image_size=self.image_size,
            num_classes=self.num_classes,
            train_count=self.train_count,
            val_count=self.val_count,
            noise_std=self.noise_std,
        )

    def contrast_config(self) -> ContrastConfig:
        return ContrastConfig(
            tau=self.tau,
            channel_groups=self.channel_groups,
            patch_side=self.patch_side,
            pool_factor=self.pool_factor,
            distance=DistanceKind(self.distance),
            include_positive_in_denominator=self.include_positive_in_denominator,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def config_from_dict(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(**raw)
    validate_config(cfg)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_dict(raw)


def save_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: RunConfig) -> None:
    _require(isinstance(cfg.seed, int), f"seed must be an int, got {cfg.seed!r}")
    for name in (
        "image_size", "num_classes", "train_count", "val_count", "teacher_layers",
        "teacher_channels", "student_layers", "student_channels", "batch_size",
        "channel_groups", "patch_side", "pool_factor",
    ):
        value = getattr(cfg, name)
        _require(
            isinstance(value, int) and value >= 1,
            f"{name} must be a positive int, got {value!r}",
        )
    for name in ("teacher_iterations", "iterations"):
        value = getattr(cfg, name)
        _require(
            isinstance(value, int) and value >= 0,
            f"{name} must be a non-negative int, got {value!r}",
        )
    _require(cfg.num_classes >= 2, "num_classes must be at least 2")
    for name in ("noise_std", "lambda1", "lambda2", "lambda3"):
        value = getattr(cfg, name)
        _require(
            isinstance(value, (int, float)) and value >= 0,
            f"{name} must be non-negative, got {value!r}",
        )
    for name in ("lr", "tau", "kd_temperature"):
        value = getattr(cfg, name)
        _require(
            isinstance(value, (int, float)) and value > 0,
            f"{name} must be positive, got {value!r}",
        )
    _require(
        isinstance(cfg.momentum, (int, float)) and 0 <= cfg.momentum < 1,
        f"momentum must be in [0, 1), got {cfg.momentum!r}",
    )
    _require(
        isinstance(cfg.mask_ratio, (int, float)) and 0 <= cfg.mask_ratio < 1,
        f"mask_ratio must be in [0, 1), got {cfg.mask_ratio!r}",
    )
    _require(
        cfg.mask_method in ("bernoulli", "exact"),
        f"mask_method must be bernoulli or exact, got {cfg.mask_method!r}",
    )
    _require(
        isinstance(cfg.loss_terms, list)
        and all(t in LOSS_TERMS for t in cfg.loss_terms)
        and len(set(cfg.loss_terms)) == len(cfg.loss_terms),
        f"loss_terms must be a subset of {list(LOSS_TERMS)}, got {cfg.loss_terms!r}",
    )
    _require("task" in cfg.loss_terms, "loss_terms must include task")
    _require(
        cfg.afdcd_variant in VARIANTS,
        f"afdcd_variant must be one of {list(VARIANTS)}, got {cfg.afdcd_variant!r}",
    )
    _require(
        cfg.distance in [k.value for k in DistanceKind],
        f"distance must be l2, l1, or cosine, got {cfg.distance!r}",
    )
    _require(
        cfg.teacher_channels >= cfg.student_channels,
        "teacher_channels must be at least student_channels",
    )
    if "afdcd" not in cfg.loss_terms:
        return
    # divisibility checks for the configured contrast variant; the contrast
    # features are the generator output, so the channel width is the teacher's
    if cfg.afdcd_variant == "sc":
        _require(cfg.image_size * cfg.image_size >= 2, "sc needs at least 2 pixels")
    elif cfg.afdcd_variant == "cc":
        _require(cfg.channel_groups >= 2, "cc needs channel_groups >= 2")
        _require(
            cfg.teacher_channels % cfg.channel_groups == 0,
            f"teacher_channels {cfg.teacher_channels} not divisible into "
            f"{cfg.channel_groups} groups",
        )
    else:
        _require(
            cfg.teacher_channels % cfg.channel_groups == 0,
            f"teacher_channels {cfg.teacher_channels} not divisible into "
            f"{cfg.channel_groups} groups",
        )
        _require(
            cfg.image_size % cfg.pool_factor == 0,
            f"image_size {cfg.image_size} not divisible by pool_factor {cfg.pool_factor}",
        )
        pooled = cfg.image_size // cfg.pool_factor
        _require(
            pooled % cfg.patch_side == 0,
            f"pooled extent {pooled} not divisible by patch_side {cfg.patch_side}",
        )
        _require(
            cfg.patch_side * cfg.patch_side * cfg.channel_groups >= 2,
            "oc needs at least 2 samples per patch",
        )
