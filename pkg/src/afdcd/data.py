"""Synthetic shapes-on-background segmentation data.

Each image is a uniform background plus 1-3 non-overlapping shapes
(rectangle, diamond, or circle depending on class), one base color per
class, with additive Gaussian pixel noise. Labels are the exact masks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, ParameterError

PLACEMENT_RETRIES = 100


@dataclass
class ToyDatasetSpec:
    image_size: int = 32
    num_classes: int = 4
    train_count: int = 512
    val_count: int = 128
    noise_std: float = 0.05
    seed: int | None = None


@dataclass
class SegSplit:
    images: np.ndarray  # (N, H, W, 3) float64
    labels: np.ndarray  # (N, H, W) int64


@dataclass
class ToyDataset:
    train: SegSplit
    val: SegSplit


def class_color(c: int, num_classes: int) -> np.ndarray:
    """Distinct base color per class, spread around the hue circle."""
    theta = 2.0 * np.pi * c / num_classes
    return 0.5 + 0.45 * np.array(
        [np.cos(theta), np.cos(theta - 2.0 * np.pi / 3.0), np.cos(theta + 2.0 * np.pi / 3.0)]
    )


def _shape_mask(size: int, kind: int, rng: np.random.Generator) -> np.ndarray:
    """Random fully-inside mask: kind 0 rectangle, 1 diamond, 2 circle."""
    r_max = max(3, size // 4)
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    if kind == 0:
        rh = int(rng.integers(2, r_max + 1))
        rw = int(rng.integers(2, r_max + 1))
        ci = int(rng.integers(rh, size - rh))
        cj = int(rng.integers(rw, size - rw))
        return (np.abs(ii - ci) <= rh) & (np.abs(jj - cj) <= rw)
    r = int(rng.integers(3, r_max + 1))
    ci = int(rng.integers(r, size - r))
    cj = int(rng.integers(r, size - r))
    if kind == 1:
        return np.abs(ii - ci) + np.abs(jj - cj) <= r
    return (ii - ci) ** 2 + (jj - cj) ** 2 <= r * r


def _render(
    spec: ToyDatasetSpec, rng: np.random.Generator, forced_class: int | None
) -> tuple[np.ndarray, np.ndarray]:
    size = spec.image_size
    label = np.zeros((size, size), dtype=np.int64)
    image = np.tile(class_color(0, spec.num_classes), (size, size, 1))
    shape_count = int(rng.integers(1, 4))
    for s in range(shape_count):
        if s == 0 and forced_class is not None:
            cls = forced_class
        else:
            cls = int(rng.integers(1, spec.num_classes))
        kind = (cls - 1) % 3
        for attempt in range(PLACEMENT_RETRIES):
            mask = _shape_mask(size, kind, rng)
            if not (mask & (label != 0)).any():
                break
        else:
            if s == 0:
                raise GenerationError(
                    f"could not place a shape after {PLACEMENT_RETRIES} attempts"
                )
            # crowded image: later shapes are optional, keep what fits
            continue
        label[mask] = cls
        image[mask] = class_color(cls, spec.num_classes)
    if spec.noise_std > 0.0:
        image = image + rng.normal(0.0, spec.noise_std, image.shape)
    return image, label


def _gen_split(
    spec: ToyDatasetSpec, count: int, rng: np.random.Generator, force_classes: bool
) -> SegSplit:
    images = np.empty((count, spec.image_size, spec.image_size, 3))
    labels = np.empty((count, spec.image_size, spec.image_size), dtype=np.int64)
    for idx in range(count):
        # cycling the first shape's class keeps every class present in the
        # training split whenever count >= num_classes - 1
        forced = 1 + idx % (spec.num_classes - 1) if force_classes else None
        images[idx], labels[idx] = _render(spec, rng, forced)
    return SegSplit(images, labels)


def gen_toy_dataset(
    spec: ToyDatasetSpec, rng: np.random.Generator | None = None
) -> ToyDataset:
    """Deterministic dataset from ToyDatasetSpec.seed or a caller-provided rng."""
    if spec.num_classes < 2:
        raise ParameterError(f"need at least 2 classes, got {spec.num_classes}")
    if spec.image_size < 12:
        raise ParameterError(f"image size too small for shapes: {spec.image_size}")
    if spec.train_count < 1 or spec.val_count < 1:
        raise ParameterError("train and val counts must be positive")
    if spec.noise_std < 0.0:
        raise ParameterError(f"noise std must be non-negative, got {spec.noise_std}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    train = _gen_split(spec, spec.train_count, rng, force_classes=True)
    val = _gen_split(spec, spec.val_count, rng, force_classes=False)
    return ToyDataset(train, val)


def save_dataset(path: str, spec: ToyDatasetSpec, dataset: ToyDataset) -> None:
    np.savez_compressed(
        path,
        train_images=dataset.train.images,
        train_labels=dataset.train.labels,
        val_images=dataset.val.images,
        val_labels=dataset.val.labels,
        image_size=spec.image_size,
        num_classes=spec.num_classes,
        noise_std=spec.noise_std,
    )
