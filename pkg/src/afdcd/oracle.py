"""Brute-force references for the optimized kernels and losses.

Everything here is a literal nested-loop transcription of the definitions,
sharing no code with the optimized paths: its own distance loop, its own
window scans, direct exp/log contrastive formula with no log-sum-exp
rearrangement. Callers keep temperatures and feature scales moderate so the
direct exponentials stay in range. Slow on purpose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError
from .losses import ContrastConfig, DistanceKind, as_kind
from .nn import ConvLayer


@dataclass
class FiniteDiffSpec:
    epsilon: float = 1e-5
    tolerance: float = 1e-5


def _dist(a, b, kind: DistanceKind) -> float:
    if kind is DistanceKind.L2_SQUARED:
        total = 0.0
        for x, y in zip(a, b):
            total += (x - y) * (x - y)
        return total
    if kind is DistanceKind.L1:
        total = 0.0
        for x, y in zip(a, b):
            total += abs(x - y)
        return total
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    return 1.0 - dot / (math.sqrt(na) * math.sqrt(nb))


def _contrast(d_pos: float, d_negs: list[float], tau: float, include_positive: bool) -> float:
    num = math.exp(-d_pos / tau)
    den = 0.0
    for d in d_negs:
        den += math.exp(-d / tau)
    if include_positive:
        den += num
    return -math.log(num / den)


def sc_bruteforce(
    fs: np.ndarray,
    ft: np.ndarray,
    tau: float,
    kind: DistanceKind | str = DistanceKind.L2_SQUARED,
    include_positive: bool = False,
) -> float:
    kind = as_kind(kind)
    h, w, _ = fs.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            d_pos = _dist(fs[i, j], ft[i, j], kind)
            d_negs = []
            for u in range(h):
                for v in range(w):
                    if (u, v) != (i, j):
                        d_negs.append(_dist(fs[i, j], ft[u, v], kind))
            total += _contrast(d_pos, d_negs, tau, include_positive)
    return total / (h * w)


def cc_bruteforce(
    fs: np.ndarray,
    ft: np.ndarray,
    m: int,
    tau: float,
    kind: DistanceKind | str = DistanceKind.L2_SQUARED,
    include_positive: bool = False,
) -> float:
    kind = as_kind(kind)
    h, w, c = fs.shape
    length = c // m
    total = 0.0
    for i in range(h):
        for j in range(w):
            for k in range(m):
                sv = fs[i, j, k * length:(k + 1) * length]
                d_pos = _dist(sv, ft[i, j, k * length:(k + 1) * length], kind)
                d_negs = []
                for g in range(m):
                    if g != k:
                        d_negs.append(_dist(sv, ft[i, j, g * length:(g + 1) * length], kind))
                total += _contrast(d_pos, d_negs, tau, include_positive)
    return total / (h * w * m)


def max_pool_bruteforce(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Window-scan max pooling; ties go to the first element scanned."""
    h, w, c = x.shape
    oh, ow = h // k, w // k
    pooled = np.empty((oh, ow, c))
    argmax = np.empty((oh, ow, c), dtype=np.int64)
    for oi in range(oh):
        for oj in range(ow):
            for ch in range(c):
                best = -math.inf
                best_at = 0
                for di in range(k):
                    for dj in range(k):
                        v = x[oi * k + di, oj * k + dj, ch]
                        if v > best:
                            best = v
                            best_at = di * k + dj
                pooled[oi, oj, ch] = best
                argmax[oi, oj, ch] = best_at
    return pooled, argmax


def _pool_pair(fs, ft, k: int, coupling: str):
    if k == 1:
        return fs, ft
    h, w, c = fs.shape
    oh, ow = h // k, w // k
    ps = np.empty((oh, ow, c))
    pt = np.empty((oh, ow, c))
    for oi in range(oh):
        for oj in range(ow):
            for ch in range(c):
                best_s = -math.inf
                best_t = -math.inf
                s_at = (0, 0)
                for di in range(k):
                    for dj in range(k):
                        vs = fs[oi * k + di, oj * k + dj, ch]
                        if vs > best_s:
                            best_s = vs
                            s_at = (di, dj)
                        vt = ft[oi * k + di, oj * k + dj, ch]
                        if vt > best_t:
                            best_t = vt
                ps[oi, oj, ch] = best_s
                if coupling == "student-indices":
                    pt[oi, oj, ch] = ft[oi * k + s_at[0], oj * k + s_at[1], ch]
                else:
                    pt[oi, oj, ch] = best_t
    return ps, pt


def oc_bruteforce(fs: np.ndarray, ft: np.ndarray, cfg: ContrastConfig) -> float:
    """Patch-wise contrastive loss by literal enumeration of every pair."""
    kind = as_kind(cfg.distance)
    n = cfg.patch_side
    m = cfg.channel_groups
    ps, pt = _pool_pair(fs, ft, cfg.pool_factor, cfg.pool_coupling)
    hp, wp, c = ps.shape
    length = c // m
    total = 0.0
    for bi in range(hp // n):
        for bj in range(wp // n):
            for i in range(n):
                for j in range(n):
                    for k in range(m):
                        sv = ps[bi * n + i, bj * n + j, k * length:(k + 1) * length]
                        tv = pt[bi * n + i, bj * n + j, k * length:(k + 1) * length]
                        d_pos = _dist(sv, tv, kind)
                        d_negs = []
                        for u in range(n):
                            for v in range(n):
                                for g in range(m):
                                    if (u, v, g) == (i, j, k):
                                        continue
                                    nv = pt[bi * n + u, bj * n + v, g * length:(g + 1) * length]
                                    d_negs.append(_dist(sv, nv, kind))
                        total += _contrast(
                            d_pos, d_negs, cfg.tau, cfg.include_positive_in_denominator
                        )
    return total / (hp * wp * m)


def conv_bruteforce(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Direct nested-loop same-padding 3x3 convolution."""
    h, w, cin = x.shape
    kernel = layer.kernel
    if kernel.shape[1] != cin:
        raise ShapeError(
            f"input has {cin} channels but kernel expects {kernel.shape[1]}"
        )
    cout = kernel.shape[0]
    out = np.empty((h, w, cout))
    for i in range(h):
        for j in range(w):
            for co in range(cout):
                acc = layer.bias[co]
                for di in range(3):
                    for dj in range(3):
                        ii = i + di - 1
                        jj = j + dj - 1
                        if 0 <= ii < h and 0 <= jj < w:
                            for ci in range(cin):
                                acc += x[ii, jj, ci] * kernel[co, ci, di, dj]
                out[i, j, co] = acc
    return out


def grad_finite_diff(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    spec: FiniteDiffSpec | None = None,
) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    if spec is None:
        spec = FiniteDiffSpec()
    eps = spec.epsilon
    grad = np.empty_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    base = np.array(x, dtype=np.float64)
    for idx in range(base.size):
        probe = base.copy()
        probe.reshape(-1)[idx] += eps
        hi = f(probe)
        probe.reshape(-1)[idx] -= 2.0 * eps
        lo = f(probe)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise NumericError(f"non-finite evaluation at coordinate {idx}")
        flat[idx] = (hi - lo) / (2.0 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Largest elementwise |a-b| / max(|a|, |b|, 1e-8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    if a.size == 0:
        return 0.0
    return float((np.abs(a - b) / denom).max())
