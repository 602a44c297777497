"""Small conv-stack segmentation models for the teacher and student.

A model is a chain of same-padding 3x3 conv + ReLU blocks followed by a
per-pixel linear classifier. The feature map used for distillation is the
output of the last block, i.e. the classifier's input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ParameterError
from .nn import ConvLayer


@dataclass
class ToyModel:
    convs: list[ConvLayer]
    classifier_w: np.ndarray  # (num_classes, channels)
    classifier_b: np.ndarray  # (num_classes,)
    feature_tap: int  # index of the block whose output is distilled

    @property
    def feature_channels(self) -> int:
        return self.convs[-1].kernel.shape[0]

    def param_list(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.convs:
            params.append(layer.kernel)
            params.append(layer.bias)
        params.append(self.classifier_w)
        params.append(self.classifier_b)
        return params


def model_init(
    layers: int,
    channels: int,
    num_classes: int,
    rng: np.random.Generator,
    in_channels: int = 3,
) -> ToyModel:
    """Uniform(-b, b) kernels with b = sqrt(1/(9*fan_in)); zero biases."""
    if layers < 1 or channels < 1 or num_classes < 2:
        raise ParameterError(
            f"invalid architecture: layers={layers} channels={channels} "
            f"classes={num_classes}"
        )
    convs = []
    cin = in_channels
    for _ in range(layers):
        bound = np.sqrt(1.0 / (9.0 * cin))
        convs.append(
            ConvLayer(rng.uniform(-bound, bound, size=(channels, cin, 3, 3)), np.zeros(channels))
        )
        cin = channels
    cbound = np.sqrt(1.0 / channels)
    classifier_w = rng.uniform(-cbound, cbound, size=(num_classes, channels))
    return ToyModel(convs, classifier_w, np.zeros(num_classes), feature_tap=layers - 1)


def model_forward(
    model: ToyModel, image: np.ndarray
) -> tuple[np.ndarray, np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Returns (logits, feature map, cache of per-block (input, pre-act))."""
    x = np.asarray(image, dtype=np.float64)
    cache = []
    for layer in model.convs:
        pre = nn.conv2d(x, layer)
        cache.append((x, pre))
        x = nn.relu(pre)
    features = x
    logits = features @ model.classifier_w.T + model.classifier_b
    return logits, features, cache


def model_backward(
    model: ToyModel,
    cache: list[tuple[np.ndarray, np.ndarray]],
    grad_logits: np.ndarray,
    grad_features: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Parameter gradients in param_list order.

    grad_features, when given, is added at the classifier input (the
    distillation tap), on top of whatever flows back from the logits.
    """
    features = nn.relu(cache[-1][1])
    grad_w = np.einsum("hwk,hwc->kc", grad_logits, features)
    grad_b = grad_logits.sum(axis=(0, 1))
    g = np.einsum("hwk,kc->hwc", grad_logits, model.classifier_w)
    if grad_features is not None:
        g = g + grad_features
    conv_grads: list[np.ndarray] = []
    for layer, (x, pre) in zip(reversed(model.convs), reversed(cache)):
        g = nn.relu_grad(pre, g)
        g, grad_kernel, grad_bias = nn.conv2d_grad(x, layer, g)
        conv_grads.append(grad_bias)
        conv_grads.append(grad_kernel)
    conv_grads.reverse()
    return conv_grads + [grad_w, grad_b]


def predict(model: ToyModel, image: np.ndarray) -> np.ndarray:
    logits, _, _ = model_forward(model, image)
    return logits.argmax(axis=2).astype(np.int64)
