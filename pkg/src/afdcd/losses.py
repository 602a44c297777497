"""Distillation loss family: feature difference, logit KD, and the dense
contrastive losses over pixels (spatial), channel groups, and patches.

Every loss returns (scalar, analytical gradient w.r.t. the student input);
the teacher side never carries gradient. Softmax-style denominators use
max-subtracted log-sum-exp throughout: d/tau reaches the thousands at the
default tau, so naive exponentials overflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import backend, nn, partition
from ._kernels_py import DIST_COSINE, DIST_L1, DIST_L2
from .errors import DegenerateInputError, ParameterError, ShapeError


class DistanceKind(Enum):
    L2_SQUARED = "l2"
    L1 = "l1"
    COSINE = "cosine"


_KIND_CODE = {
    DistanceKind.L2_SQUARED: DIST_L2,
    DistanceKind.L1: DIST_L1,
    DistanceKind.COSINE: DIST_COSINE,
}


def as_kind(kind: DistanceKind | str) -> DistanceKind:
    if isinstance(kind, DistanceKind):
        return kind
    try:
        return DistanceKind(kind)
    except ValueError:
        names = ", ".join(k.value for k in DistanceKind)
        raise ParameterError(f"unknown distance kind {kind!r} (expected {names})") from None


@dataclass
class ContrastConfig:
    tau: float = 0.07
    channel_groups: int = 16
    patch_side: int = 4
    pool_factor: int = 4
    distance: DistanceKind = DistanceKind.L2_SQUARED
    include_positive_in_denominator: bool = False
    pool_coupling: str = "independent"


@dataclass
class LossBundle:
    task: float
    kd: float
    fd: float
    afdcd: float
    total: float
    lambda1: float
    lambda2: float
    lambda3: float


def distance(a: np.ndarray, b: np.ndarray, kind: DistanceKind | str) -> float:
    """Distance between two vectors under the configured kind."""
    kind = as_kind(kind)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"expected equal-length vectors, got {a.shape} and {b.shape}")
    if kind is DistanceKind.L2_SQUARED:
        diff = a - b
        return float(diff @ diff)
    if kind is DistanceKind.L1:
        return float(np.abs(a - b).sum())
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine distance undefined for a zero vector")
    return float(1.0 - (a @ b) / (na * nb))


def l_fd(ft: np.ndarray, fs: np.ndarray) -> tuple[float, np.ndarray]:
    """Unnormalized sum of squared differences over every map entry."""
    if ft.shape != fs.shape:
        raise ShapeError(f"teacher shape {ft.shape} does not match student {fs.shape}")
    diff = np.asarray(ft, dtype=np.float64) - np.asarray(fs, dtype=np.float64)
    return float((diff * diff).sum()), -2.0 * diff


def contrast_sample(
    d_pos: float,
    d_negs: np.ndarray,
    tau: float,
    include_positive: bool = False,
) -> tuple[float, float, np.ndarray]:
    """One contrastive sample from its distances.

    Returns (loss, d loss/d d_pos, d loss/d d_negs). The denominator runs
    over the negatives only unless include_positive is set.
    """
    if tau <= 0.0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    d_negs = np.asarray(d_negs, dtype=np.float64).ravel()
    if d_negs.size == 0:
        raise ParameterError("contrastive sample needs at least one negative")
    z = -d_negs / tau
    if include_positive:
        z = np.append(z, -d_pos / tau)
    zmax = z.max()
    lse = zmax + np.log(np.exp(z - zmax).sum())
    loss = d_pos / tau + lse
    weights = np.exp(z - lse)
    grad_pos = 1.0 / tau
    if include_positive:
        grad_pos -= weights[-1] / tau
        grad_negs = -weights[:-1] / tau
    else:
        grad_negs = -weights / tau
    return float(loss), float(grad_pos), grad_negs


def _check_pair(fs: np.ndarray, ft: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fs = np.ascontiguousarray(fs, dtype=np.float64)
    ft = np.ascontiguousarray(ft, dtype=np.float64)
    if fs.ndim != 3:
        raise ShapeError(f"feature maps must have shape (H, W, C), got {fs.shape}")
    if fs.shape != ft.shape:
        raise ShapeError(f"student shape {fs.shape} does not match teacher {ft.shape}")
    if not (np.isfinite(fs).all() and np.isfinite(ft).all()):
        raise DegenerateInputError("feature maps must be finite")
    return fs, ft


def _contrast_batch(
    s: np.ndarray,
    t: np.ndarray,
    tau: float,
    kind: DistanceKind,
    include_positive: bool,
) -> tuple[float, np.ndarray]:
    """Mean contrastive loss over (B, n, d) sample batches, with grad w.r.t. s.

    Within each batch element, sample i takes t[i] as its positive and every
    other row of t as a negative.
    """
    if tau <= 0.0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    kern = backend.kernels()
    code = _KIND_CODE[kind]
    if kind is DistanceKind.COSINE:
        if (np.linalg.norm(s, axis=2) == 0.0).any() or (np.linalg.norm(t, axis=2) == 0.0).any():
            raise DegenerateInputError("cosine distance undefined for a zero vector")
    b, n, _ = s.shape
    d = kern.pairwise_distances(s, t, code)
    z = -d / tau
    diag = np.arange(n)
    if not include_positive:
        z[:, diag, diag] = -np.inf
    zmax = z.max(axis=2, keepdims=True)
    lse = zmax[:, :, 0] + np.log(np.exp(z - zmax).sum(axis=2))
    loss = float((d[:, diag, diag] / tau + lse).mean())
    # d loss_i / d D_ij is -w_ij/tau over the denominator plus 1/tau at the
    # positive; w is zero where the positive was excluded, so one formula
    # covers both settings.
    w = np.exp(z - lse[:, :, None])
    g = -w / tau
    g[:, diag, diag] += 1.0 / tau
    g /= b * n
    return loss, kern.pairwise_distances_backward(s, t, g, code)


def loss_sc(
    fs: np.ndarray,
    ft: np.ndarray,
    tau: float,
    kind: DistanceKind | str = DistanceKind.L2_SQUARED,
    include_positive: bool = False,
) -> tuple[float, np.ndarray]:
    """Pixel-wise contrast: each pixel against the HW-1 other teacher pixels."""
    fs, ft = _check_pair(fs, ft)
    kind = as_kind(kind)
    h, w, c = fs.shape
    if h * w < 2:
        raise ParameterError("spatial contrast needs at least 2 pixels")
    loss, grad = _contrast_batch(
        fs.reshape(1, h * w, c), ft.reshape(1, h * w, c), tau, kind, include_positive
    )
    return loss, grad.reshape(h, w, c)


def loss_cc(
    fs: np.ndarray,
    ft: np.ndarray,
    m: int,
    tau: float,
    kind: DistanceKind | str = DistanceKind.L2_SQUARED,
    include_positive: bool = False,
) -> tuple[float, np.ndarray]:
    """Channel-group contrast: per pixel, each group against the M-1 others."""
    fs, ft = _check_pair(fs, ft)
    kind = as_kind(kind)
    h, w, c = fs.shape
    if not isinstance(m, int) or m < 2:
        raise ParameterError(f"channel contrast needs at least 2 groups, got {m!r}")
    if c % m:
        raise ShapeError(f"{c} channels not divisible into {m} groups")
    length = c // m
    loss, grad = _contrast_batch(
        fs.reshape(h * w, m, length), ft.reshape(h * w, m, length), tau, kind, include_positive
    )
    return loss, grad.reshape(h, w, c)


def loss_oc(
    fs: np.ndarray, ft: np.ndarray, cfg: ContrastConfig
) -> tuple[float, np.ndarray]:
    """Patch-wise contrast over fine-grained (position, group) samples.

    Pipeline: optional max-pool pre-reduction, disjoint patch tiling, channel
    grouping; every sample contrasts against the n*n*M - 1 other teacher
    representations of its own patch, and the mean runs over all pooled
    H'*W'*M samples. The student gradient is routed back through the pooling
    argmax record.
    """
    fs, ft = _check_pair(fs, ft)
    kind = as_kind(cfg.distance)
    n = cfg.patch_side
    m = cfg.channel_groups
    if not isinstance(m, int) or m < 1:
        raise ParameterError(f"channel groups must be a positive int, got {m!r}")
    if not isinstance(n, int) or n < 1:
        raise ParameterError(f"patch side must be a positive int, got {n!r}")
    if n * n * m < 2:
        raise ParameterError("patch contrast needs at least 2 samples per patch")
    pooled_s, pooled_t, argmax = partition.pool_pre_reduce(
        fs, ft, cfg.pool_factor, cfg.pool_coupling
    )
    c = fs.shape[2]
    if c % m:
        raise ShapeError(f"{c} channels not divisible into {m} groups")
    grid, patches_s = partition.split_patches(pooled_s, n, n)
    _, patches_t = partition.split_patches(pooled_t, n, n)
    length = c // m
    per_patch = n * n * m
    s = patches_s.reshape(grid.count, per_patch, length)
    t = patches_t.reshape(grid.count, per_patch, length)
    loss, grad = _contrast_batch(
        s, t, cfg.tau, kind, cfg.include_positive_in_denominator
    )
    grad_pooled = partition.merge_patches(grid, grad.reshape(grid.count, n, n, c))
    if argmax is None:
        return loss, grad_pooled
    return loss, nn.max_pool_grad(argmax, grad_pooled, cfg.pool_factor)


def loss_kd(
    student_logits: np.ndarray, teacher_logits: np.ndarray, temperature: float
) -> tuple[float, np.ndarray]:
    """Temperature-scaled KL from teacher to student, averaged over pixels."""
    if student_logits.shape != teacher_logits.shape:
        raise ShapeError(
            f"student logits {student_logits.shape} do not match teacher "
            f"{teacher_logits.shape}"
        )
    if student_logits.ndim != 3:
        raise ShapeError(f"logits must have shape (H, W, K), got {student_logits.shape}")
    if temperature <= 0.0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    t = float(temperature)
    h, w, _ = student_logits.shape

    def log_softmax(z: np.ndarray) -> np.ndarray:
        zmax = z.max(axis=2, keepdims=True)
        return z - zmax - np.log(np.exp(z - zmax).sum(axis=2, keepdims=True))

    log_ps = log_softmax(np.asarray(student_logits, dtype=np.float64) / t)
    log_pt = log_softmax(np.asarray(teacher_logits, dtype=np.float64) / t)
    pt = np.exp(log_pt)
    loss = float(t * t * (pt * (log_pt - log_ps)).sum() / (h * w))
    grad = t * (np.exp(log_ps) - pt) / (h * w)
    return loss, grad


def total_loss(
    task: float,
    kd: float,
    fd: float,
    afdcd: float,
    lambda1: float = 1.0,
    lambda2: float = 2e-5,
    lambda3: float = 5e-3,
) -> LossBundle:
    """Weighted sum of the four components."""
    for lam, name in ((lambda1, "lambda1"), (lambda2, "lambda2"), (lambda3, "lambda3")):
        if lam < 0.0:
            raise ParameterError(f"{name} must be non-negative, got {lam}")
    total = task + lambda1 * kd + lambda2 * fd + lambda3 * afdcd
    return LossBundle(task, kd, fd, afdcd, total, lambda1, lambda2, lambda3)
