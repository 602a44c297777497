"""Minimal deterministic network substrate: conv, relu, pooling, softmax, SGD.

Feature maps are float64 arrays of shape (H, W, C) in row-major order.
Everything here is a pure function of its inputs; gradients are exact
adjoints of the forward definitions so finite-difference checks hold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ParameterError, ShapeError

IGNORE_INDEX = 255


@dataclass
class ConvLayer:
    """3x3 convolution parameters: kernel (Cout, Cin, 3, 3) and bias (Cout,)."""

    kernel: np.ndarray
    bias: np.ndarray


def _check_map(x: np.ndarray, name: str) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"{name} must have shape (H, W, C), got {x.shape}")
    return np.ascontiguousarray(x, dtype=np.float64)


def _check_layer(layer: ConvLayer) -> tuple[np.ndarray, np.ndarray]:
    kernel = np.ascontiguousarray(layer.kernel, dtype=np.float64)
    bias = np.ascontiguousarray(layer.bias, dtype=np.float64)
    if kernel.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise ShapeError(f"kernel must have shape (Cout, Cin, 3, 3), got {kernel.shape}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(
            f"bias length {bias.shape} does not match {kernel.shape[0]} output channels"
        )
    return kernel, bias


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Same-padding stride-1 3x3 convolution."""
    x = _check_map(x, "input")
    kernel, bias = _check_layer(layer)
    if x.shape[2] != kernel.shape[1]:
        raise ShapeError(
            f"input has {x.shape[2]} channels but kernel expects {kernel.shape[1]}"
        )
    return backend.kernels().conv2d_forward(x, kernel, bias)


def conv2d_grad(
    x: np.ndarray, layer: ConvLayer, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of <upstream, conv2d(x, layer)> w.r.t. input, kernel, bias."""
    x = _check_map(x, "input")
    kernel, _ = _check_layer(layer)
    upstream = _check_map(upstream, "upstream")
    if x.shape[2] != kernel.shape[1]:
        raise ShapeError(
            f"input has {x.shape[2]} channels but kernel expects {kernel.shape[1]}"
        )
    if upstream.shape != (x.shape[0], x.shape[1], kernel.shape[0]):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match conv output "
            f"{(x.shape[0], x.shape[1], kernel.shape[0])}"
        )
    return backend.kernels().conv2d_backward(x, kernel, upstream)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pass upstream where the pre-activation is strictly positive."""
    if x.shape != upstream.shape:
        raise ShapeError(f"upstream shape {upstream.shape} does not match {x.shape}")
    return np.where(x > 0.0, upstream, 0.0)


def max_pool(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k-by-k max pooling; returns (pooled, argmax record for the backward)."""
    x = _check_map(x, "input")
    if not isinstance(k, int) or k < 1:
        raise ParameterError(f"pool size must be a positive int, got {k!r}")
    h, w, _ = x.shape
    if h % k or w % k:
        raise ShapeError(f"extents {h}x{w} not divisible by pool size {k}")
    return backend.kernels().max_pool_forward(x, k)


def max_pool_grad(argmax: np.ndarray, upstream: np.ndarray, k: int) -> np.ndarray:
    """Route upstream gradient to the positions recorded by max_pool."""
    if argmax.shape != upstream.shape:
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match argmax record {argmax.shape}"
        )
    upstream = _check_map(upstream, "upstream")
    return backend.kernels().max_pool_backward(np.ascontiguousarray(argmax), upstream, k)


def softmax_xent(
    logits: np.ndarray, labels: np.ndarray, ignore_index: int = IGNORE_INDEX
) -> tuple[float, np.ndarray]:
    """Mean per-pixel cross-entropy over non-ignored pixels, with its gradient.

    The gradient is (softmax - onehot) / count at valid pixels and zero where
    the label equals the ignore index; all pixels ignored gives (0, zeros).
    """
    logits = _check_map(logits, "logits")
    h, w, num_classes = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (h, w):
        raise ShapeError(f"labels shape {labels.shape} does not match logits {h}x{w}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ParameterError(f"labels must be integers, got dtype {labels.dtype}")
    valid = labels != ignore_index
    bad = valid & ((labels < 0) | (labels >= num_classes))
    if bad.any():
        raise ParameterError(
            f"labels outside [0, {num_classes}) at {int(bad.sum())} pixels"
        )
    count = int(valid.sum())
    if count == 0:
        return 0.0, np.zeros_like(logits)

    zmax = logits.max(axis=2, keepdims=True)
    expz = np.exp(logits - zmax)
    sumz = expz.sum(axis=2, keepdims=True)
    lse = zmax[:, :, 0] + np.log(sumz[:, :, 0])
    picked = np.take_along_axis(
        logits, np.where(valid, labels, 0)[:, :, None], axis=2
    )[:, :, 0]
    loss = float(((lse - picked) * valid).sum() / count)

    grad = expz / sumz
    onehot_rows = np.where(valid)
    grad[onehot_rows[0], onehot_rows[1], labels[valid]] -= 1.0
    grad *= valid[:, :, None] / count
    return loss, grad


def sgd_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    velocity: list[np.ndarray],
    lr: float,
    momentum: float,
) -> None:
    """In-place momentum SGD: v <- momentum*v + g; p <- p - lr*v."""
    if not 0.0 <= momentum < 1.0:
        raise ParameterError(f"momentum must be in [0, 1), got {momentum}")
    if lr <= 0.0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    if not len(params) == len(grads) == len(velocity):
        raise ShapeError("params, grads, and velocity must have equal lengths")
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeError(
                f"mismatched shapes in sgd_step: {p.shape}, {g.shape}, {v.shape}"
            )
        v *= momentum
        v += g
        p -= lr * v
