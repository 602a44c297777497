"""Diagnostics: teacher-student distance statistics, local self-similarity
distributions, and mean intersection-over-union scoring.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError
from .nn import IGNORE_INDEX

HISTOGRAM_BINS = 64
FULL_POPULATION_LIMIT = 1_000_000
SUBSAMPLE_COUNT = 10_000


@dataclass
class DistanceHistogram:
    bin_edges: np.ndarray  # 65 ascending edges
    counts: np.ndarray  # 64 bins
    mean: float
    variance: float
    sample_count: int


def _check_grouped(f: np.ndarray, m: int) -> tuple[int, int, int, int]:
    if f.ndim != 3:
        raise ShapeError(f"feature map must have shape (H, W, C), got {f.shape}")
    h, w, c = f.shape
    if not isinstance(m, int) or m < 1:
        raise ParameterError(f"channel groups must be a positive int, got {m!r}")
    if c % m:
        raise ShapeError(f"{c} channels not divisible into {m} groups")
    return h, w, c, c // m


def ts_pair_distances(fs: np.ndarray, ft: np.ndarray, m: int) -> np.ndarray:
    """Squared distances of every matching (position, group) pair, flat."""
    if fs.shape != ft.shape:
        raise ShapeError(f"student shape {fs.shape} does not match teacher {ft.shape}")
    h, w, c, length = _check_grouped(fs, m)
    diff = (np.asarray(fs, dtype=np.float64) - np.asarray(ft, dtype=np.float64)).reshape(
        h * w * m, length
    )
    return (diff * diff).sum(axis=1)


def self_similarity_distances(f: np.ndarray, window: int, m: int) -> np.ndarray:
    """Squared distances among all fine-grained reps of each window, flat.

    Windows are the disjoint window x window tiles; within one window every
    unordered pair of the window^2 * M representations contributes once.
    """
    h, w, c, length = _check_grouped(f, m)
    if not isinstance(window, int) or window < 1:
        raise ParameterError(f"window must be a positive int, got {window!r}")
    if h % window or w % window:
        raise ShapeError(f"extents {h}x{w} not divisible by window {window}")
    f = np.asarray(f, dtype=np.float64)
    nh, nw = h // window, w // window
    per = window * window * m
    reps = (
        f.reshape(nh, window, nw, window, m, length)
        .transpose(0, 2, 1, 3, 4, 5)
        .reshape(nh * nw, per, length)
    )
    diff = reps[:, :, None, :] - reps[:, None, :, :]
    d = (diff * diff).sum(axis=3)
    iu, ju = np.triu_indices(per, k=1)
    return d[:, iu, ju].reshape(-1)


def subsample_distances(
    distances: np.ndarray,
    sample_count: int | None,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Apply the sampling policy: full population when small, else a seeded
    without-replacement subsample (default 1e4 when the population exceeds 1e6).
    """
    population = distances.size
    if sample_count is None:
        if population <= FULL_POPULATION_LIMIT:
            return distances
        sample_count = SUBSAMPLE_COUNT
    if sample_count > population:
        raise ParameterError(
            f"requested {sample_count} samples from a population of {population}"
        )
    if sample_count == population:
        return distances
    if rng is None:
        raise ParameterError("subsampling needs an rng")
    return distances[rng.choice(population, size=sample_count, replace=False)]


def histogram_from_distances(distances: np.ndarray) -> DistanceHistogram:
    """64 uniform bins over [0, observed max] ([0, 1] for an all-zero set)."""
    distances = np.asarray(distances, dtype=np.float64).ravel()
    if distances.size == 0:
        raise ParameterError("cannot histogram an empty distance set")
    top = float(distances.max())
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, HISTOGRAM_BINS + 1)
    counts, _ = np.histogram(distances, bins=edges)
    return DistanceHistogram(
        bin_edges=edges,
        counts=counts,
        mean=float(distances.mean()),
        variance=float(distances.var()),
        sample_count=int(distances.size),
    )


def ts_distance_stats(
    fs: np.ndarray,
    ft: np.ndarray,
    m: int,
    sample_count: int | None = None,
    rng: np.random.Generator | None = None,
) -> DistanceHistogram:
    """Distribution of matching-pair distances between student and teacher."""
    dists = ts_pair_distances(fs, ft, m)
    return histogram_from_distances(subsample_distances(dists, sample_count, rng))


def self_similarity_stats(
    f: np.ndarray,
    window: int,
    m: int,
    sample_count: int | None = None,
    rng: np.random.Generator | None = None,
) -> DistanceHistogram:
    """Distribution of within-window pairwise distances of one feature map."""
    dists = self_similarity_distances(f, window, m)
    return histogram_from_distances(subsample_distances(dists, sample_count, rng))


def format_histogram_csv(hist: DistanceHistogram) -> str:
    """Bin rows under `bin_lo,bin_hi,count`, then a `mean,variance,n` summary."""
    lines = ["bin_lo,bin_hi,count"]
    for i in range(len(hist.counts)):
        lines.append(
            f"{hist.bin_edges[i]!r},{hist.bin_edges[i + 1]!r},{int(hist.counts[i])}"
        )
    lines.append("mean,variance,n")
    lines.append(f"{hist.mean!r},{hist.variance!r},{hist.sample_count}")
    return "\n".join(lines) + "\n"


def confusion_matrix(pred: np.ndarray, label: np.ndarray, num_classes: int) -> np.ndarray:
    """(K, K) counts with true class on rows; ignore-index pixels excluded."""
    pred = np.asarray(pred)
    label = np.asarray(label)
    if pred.shape != label.shape:
        raise ShapeError(f"pred shape {pred.shape} does not match label {label.shape}")
    if not (np.issubdtype(pred.dtype, np.integer) and np.issubdtype(label.dtype, np.integer)):
        raise ParameterError("pred and label must be integer arrays")
    valid = label != IGNORE_INDEX
    if ((pred < 0) | (pred >= num_classes)).any():
        raise ParameterError(f"pred values outside [0, {num_classes})")
    lab = label[valid]
    if ((lab < 0) | (lab >= num_classes)).any():
        raise ParameterError(f"label values outside [0, {num_classes})")
    joint = lab.astype(np.int64) * num_classes + pred[valid].astype(np.int64)
    return np.bincount(joint, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def miou_from_confusion(conf: np.ndarray) -> tuple[list[float], float]:
    """Per-class IoU (nan where the union is empty) and their mean."""
    tp = np.diag(conf).astype(np.float64)
    union = conf.sum(axis=0) + conf.sum(axis=1) - np.diag(conf)
    present = union > 0
    if not present.any():
        raise DegenerateInputError("no class has any predicted or true pixel")
    per_class = np.full(conf.shape[0], np.nan)
    per_class[present] = tp[present] / union[present]
    return per_class.tolist(), float(per_class[present].mean())


def miou(pred: np.ndarray, label: np.ndarray, num_classes: int) -> tuple[list[float], float]:
    """Intersection-over-union per class and its mean over present classes."""
    return miou_from_confusion(confusion_matrix(pred, label, num_classes))
