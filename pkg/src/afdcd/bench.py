"""Timing comparison between the numpy kernels and the compiled core.

Each case times one kernel call on a fixed workload, best-of-N wall
clock. Pure measurement, no correctness checking; the backend tests
cover equivalence.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels_py

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

WARMUP = 2


@dataclass
class BenchRow:
    case: str
    python_ms: float
    compiled_ms: float | None

    @property
    def speedup(self) -> float | None:
        if self.compiled_ms is None or self.compiled_ms == 0.0:
            return None
        return self.python_ms / self.compiled_ms


def _time_call(fn: Callable[[], object], repeats: int) -> float:
    for _ in range(WARMUP):
        fn()
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1e3


def _cases(rng: np.random.Generator) -> list[tuple[str, Callable[[object], object]]]:
    x = rng.standard_normal((32, 32, 8))
    kernel = rng.standard_normal((32, 8, 3, 3)) * 0.1
    bias = np.zeros(32)
    up = rng.standard_normal((32, 32, 32))
    pool_in = rng.standard_normal((64, 64, 16))
    s = rng.standard_normal((16, 64, 16))
    t = rng.standard_normal((16, 64, 16))
    g = rng.standard_normal((16, 64, 64)) * 0.01

    return [
        ("conv2d_forward 32x32x8->32", lambda k: k.conv2d_forward(x, kernel, bias)),
        ("conv2d_backward 32x32x8->32", lambda k: k.conv2d_backward(x, kernel, up)),
        ("max_pool_forward 64x64x16 k=4", lambda k: k.max_pool_forward(pool_in, 4)),
        ("pairwise l2 16x64x16", lambda k: k.pairwise_distances(s, t, k.DIST_L2)),
        ("pairwise l1 16x64x16", lambda k: k.pairwise_distances(s, t, k.DIST_L1)),
        (
            "pairwise cosine 16x64x16",
            lambda k: k.pairwise_distances(s, t, k.DIST_COSINE),
        ),
        (
            "pairwise l2 backward 16x64x16",
            lambda k: k.pairwise_distances_backward(s, t, g, k.DIST_L2),
        ),
    ]


def run_bench(repeats: int = 5, seed: int = 0) -> list[BenchRow]:
    rng = np.random.default_rng(seed)
    rows = []
    for case, call in _cases(rng):
        python_ms = _time_call(lambda: call(_kernels_py), repeats)
        compiled_ms = None
        if _compiled is not None:
            compiled_ms = _time_call(lambda: call(_compiled), repeats)
        rows.append(BenchRow(case, python_ms, compiled_ms))
    return rows


def format_table(rows: list[BenchRow]) -> str:
    width = max(len(r.case) for r in rows)
    lines = [f"{'case':<{width}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}"]
    for r in rows:
        if r.compiled_ms is None:
            comp, speed = f"{'-':>10}", f"{'-':>8}"
        else:
            comp = f"{r.compiled_ms:>8.3f}ms"
            speed = f"{r.speedup:>7.2f}x"
        lines.append(f"{r.case:<{width}}  {r.python_ms:>8.3f}ms  {comp}  {speed}")
    if _compiled is None:
        lines.append("compiled core not built; showing the numpy fallback only")
    return "\n".join(lines) + "\n"
