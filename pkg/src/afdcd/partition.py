"""Index bookkeeping: patch tiling, channel grouping, pooled pre-reduction,
and the analytic pair-count model for the dense contrastive losses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ParameterError, ShapeError


@dataclass
class PatchGrid:
    """Row-major tiling of an (H, W) map into disjoint patch_h x patch_w tiles."""

    patch_h: int
    patch_w: int
    count: int
    origins: np.ndarray  # (count, 2) top-left offsets in patch order
    map_h: int
    map_w: int


@dataclass
class ChannelGrouping:
    groups: int
    group_len: int


@dataclass
class PairCounts:
    """Sample/pair counts of the patch-wise contrastive loss.

    samples is the positive-pair count; distances counts every distance
    evaluated (positives included); flops = distances * ops_per_element * dim.
    """

    samples: int
    negatives: int
    distances: int
    flops: int


def _check_positive(value: int, name: str) -> int:
    if not isinstance(value, int) or value < 1:
        raise ParameterError(f"{name} must be a positive int, got {value!r}")
    return value


def split_patches(f: np.ndarray, patch_h: int, patch_w: int) -> tuple[PatchGrid, np.ndarray]:
    """Tile (H, W, C) into (count, patch_h, patch_w, C) in row-major patch order."""
    if f.ndim != 3:
        raise ShapeError(f"feature map must have shape (H, W, C), got {f.shape}")
    _check_positive(patch_h, "patch_h")
    _check_positive(patch_w, "patch_w")
    h, w, c = f.shape
    if h % patch_h or w % patch_w:
        raise ShapeError(
            f"extents {h}x{w} not divisible by patch size {patch_h}x{patch_w}"
        )
    gh, gw = h // patch_h, w // patch_w
    patches = np.ascontiguousarray(
        f.reshape(gh, patch_h, gw, patch_w, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(gh * gw, patch_h, patch_w, c)
    )
    origins = np.array(
        [(bi * patch_h, bj * patch_w) for bi in range(gh) for bj in range(gw)],
        dtype=np.int64,
    )
    grid = PatchGrid(patch_h, patch_w, gh * gw, origins, h, w)
    return grid, patches


def merge_patches(grid: PatchGrid, patches: np.ndarray) -> np.ndarray:
    """Inverse of split_patches."""
    c = patches.shape[3]
    if patches.shape[:3] != (grid.count, grid.patch_h, grid.patch_w):
        raise ShapeError(
            f"patches shape {patches.shape} does not match grid "
            f"({grid.count}, {grid.patch_h}, {grid.patch_w}, C)"
        )
    gh = grid.map_h // grid.patch_h
    gw = grid.map_w // grid.patch_w
    return np.ascontiguousarray(
        patches.reshape(gh, gw, grid.patch_h, grid.patch_w, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(grid.map_h, grid.map_w, c)
    )


def split_channel_groups(f: np.ndarray, m: int) -> tuple[ChannelGrouping, np.ndarray]:
    """View (H, W, C) as (H, W, M, C/M) contiguous channel groups."""
    if f.ndim != 3:
        raise ShapeError(f"feature map must have shape (H, W, C), got {f.shape}")
    _check_positive(m, "channel groups")
    h, w, c = f.shape
    if c % m:
        raise ShapeError(f"{c} channels not divisible into {m} groups")
    return ChannelGrouping(m, c // m), f.reshape(h, w, m, c // m)


def pool_pre_reduce(
    fs: np.ndarray,
    ft: np.ndarray,
    k: int,
    coupling: str = "independent",
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Max-pool both maps by k; returns (student, teacher, student argmax).

    With coupling "independent" each map keeps its own maxima; with
    "student-indices" the teacher is gathered at the student's argmax
    positions. k=1 is the identity (argmax record None).
    """
    if fs.shape != ft.shape:
        raise ShapeError(f"student shape {fs.shape} does not match teacher {ft.shape}")
    if coupling not in ("independent", "student-indices"):
        raise ParameterError(f"unknown pool coupling {coupling!r}")
    _check_positive(k, "pool factor")
    if k == 1:
        return fs, ft, None
    pooled_s, argmax_s = nn.max_pool(fs, k)
    if coupling == "independent":
        pooled_t, _ = nn.max_pool(ft, k)
    else:
        h, w, c = ft.shape
        oh, ow = h // k, w // k
        windows = (
            np.asarray(ft, dtype=np.float64)
            .reshape(oh, k, ow, k, c)
            .transpose(0, 2, 1, 3, 4)
            .reshape(oh, ow, k * k, c)
        )
        pooled_t = np.take_along_axis(windows, argmax_s[:, :, None, :], axis=2)[:, :, 0, :]
        pooled_t = np.ascontiguousarray(pooled_t)
    return pooled_s, pooled_t, argmax_s


def pair_count_model(
    h: int,
    w: int,
    c: int,
    m: int,
    patch_side: int,
    pool_factor: int = 1,
    ops_per_element: int = 3,
) -> PairCounts:
    """Exact integer sample/negative/distance counts for the patch-wise loss.

    After pooling by q the map is H' x W'; every one of the H'*W'*M
    fine-grained samples is contrasted against the n^2*M representations of
    its own patch, so distances = samples * n^2*M and each sample sees
    n^2*M - 1 negatives. flops = distances * ops_per_element * (C/M),
    with ops_per_element a calibration constant (default 3 for the
    subtract/square/accumulate inner loop).
    """
    for value, name in ((h, "H"), (w, "W"), (c, "C"), (m, "M")):
        _check_positive(value, name)
    _check_positive(patch_side, "patch side")
    _check_positive(pool_factor, "pool factor")
    _check_positive(ops_per_element, "ops per element")
    if h % pool_factor or w % pool_factor:
        raise ShapeError(f"extents {h}x{w} not divisible by pool factor {pool_factor}")
    hp, wp = h // pool_factor, w // pool_factor
    if hp % patch_side or wp % patch_side:
        raise ShapeError(
            f"pooled extents {hp}x{wp} not divisible by patch side {patch_side}"
        )
    if c % m:
        raise ShapeError(f"{c} channels not divisible into {m} groups")
    samples = hp * wp * m
    per_patch = patch_side * patch_side * m
    negatives = samples * (per_patch - 1)
    distances = samples * per_patch
    flops = distances * ops_per_element * (c // m)
    return PairCounts(samples, negatives, distances, flops)
