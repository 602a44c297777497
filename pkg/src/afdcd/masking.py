"""Spatial masking of student features and the two-conv reconstruction
generator that maps them onto the teacher's channel width.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ParameterError, ShapeError
from .nn import ConvLayer


@dataclass
class SpatialMask:
    """Binary (H, W) keep/drop pattern broadcast over channels."""

    bits: np.ndarray
    ratio: float


@dataclass
class GeneratorParams:
    """conv1 maps student channels to teacher channels; conv2 refines."""

    conv1: ConvLayer
    conv2: ConvLayer

    def param_list(self) -> list[np.ndarray]:
        return [self.conv1.kernel, self.conv1.bias, self.conv2.kernel, self.conv2.bias]


def sample_mask(
    h: int,
    w: int,
    ratio: float,
    rng: np.random.Generator,
    method: str = "bernoulli",
) -> SpatialMask:
    """Draw a mask dropping each position with probability ratio.

    "bernoulli" masks positions independently; "exact" masks exactly
    round(ratio*H*W) positions chosen uniformly.
    """
    if not 0.0 <= ratio < 1.0:
        raise ParameterError(f"mask ratio must be in [0, 1), got {ratio}")
    if h < 1 or w < 1:
        raise ParameterError(f"mask extents must be positive, got {h}x{w}")
    if method == "bernoulli":
        bits = (rng.random((h, w)) >= ratio).astype(np.float64)
    elif method == "exact":
        dropped = round(ratio * h * w)
        flat = np.ones(h * w)
        flat[rng.permutation(h * w)[:dropped]] = 0.0
        bits = flat.reshape(h, w)
    else:
        raise ParameterError(f"unknown mask method {method!r}")
    return SpatialMask(bits, ratio)


def apply_mask(f: np.ndarray, mask: SpatialMask) -> np.ndarray:
    """Zero the channel vector at every dropped position."""
    if f.ndim != 3:
        raise ShapeError(f"feature map must have shape (H, W, C), got {f.shape}")
    if mask.bits.shape != f.shape[:2]:
        raise ShapeError(
            f"mask extents {mask.bits.shape} do not match map {f.shape[:2]}"
        )
    return f * mask.bits[:, :, None]


def generator_init(
    student_channels: int, teacher_channels: int, rng: np.random.Generator
) -> GeneratorParams:
    """Uniform(-b, b) kernels with b = sqrt(1/(9*fan_in)); zero biases."""
    if student_channels < 1 or teacher_channels < 1:
        raise ParameterError(
            f"channel counts must be positive, got {student_channels}, {teacher_channels}"
        )
    layers = []
    for cin, cout in ((student_channels, teacher_channels), (teacher_channels, teacher_channels)):
        bound = np.sqrt(1.0 / (9.0 * cin))
        kernel = rng.uniform(-bound, bound, size=(cout, cin, 3, 3))
        layers.append(ConvLayer(kernel, np.zeros(cout)))
    return GeneratorParams(layers[0], layers[1])


def generator_forward(masked: np.ndarray, params: GeneratorParams) -> np.ndarray:
    """conv1 -> ReLU -> conv2."""
    out, _ = generator_forward_cache(masked, params)
    return out


def generator_forward_cache(
    masked: np.ndarray, params: GeneratorParams
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Forward pass keeping the intermediates the backward needs."""
    pre1 = nn.conv2d(masked, params.conv1)
    act1 = nn.relu(pre1)
    out = nn.conv2d(act1, params.conv2)
    return out, (np.asarray(masked, dtype=np.float64), pre1, act1)


def generator_backward(
    cache: tuple[np.ndarray, np.ndarray, np.ndarray],
    params: GeneratorParams,
    upstream: np.ndarray,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Gradients w.r.t. the masked input and [k1, b1, k2, b2]."""
    x, pre1, act1 = cache
    grad_act1, grad_k2, grad_b2 = nn.conv2d_grad(act1, params.conv2, upstream)
    grad_pre1 = nn.relu_grad(pre1, grad_act1)
    grad_x, grad_k1, grad_b1 = nn.conv2d_grad(x, params.conv1, grad_pre1)
    return grad_x, [grad_k1, grad_b1, grad_k2, grad_b2]
