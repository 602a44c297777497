"""Pure-numpy implementations of the hot kernels.

Same contract as the compiled core (afdcd._core): float64 C-contiguous
arrays in, validated by the callers in nn/losses. Distance kinds are the
integer codes DIST_L2 / DIST_L1 / DIST_COSINE shared by both backends.
"""
from __future__ import annotations

import numpy as np

DIST_L2 = 0
DIST_L1 = 1
DIST_COSINE = 2

# chunk size (elements) for the L1 broadcast temporaries
_L1_CHUNK = 4_000_000


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 same-padding stride-1 convolution of an (H, W, Cin) map."""
    h, w, cin = x.shape
    cout = kernel.shape[0]
    padded = np.zeros((h + 2, w + 2, cin))
    padded[1:-1, 1:-1] = x
    out = np.empty((h, w, cout))
    out[:] = bias
    flat = out.reshape(h * w, cout)
    for di in range(3):
        for dj in range(3):
            window = padded[di:di + h, dj:dj + w].reshape(h * w, cin)
            flat += window @ kernel[:, :, di, dj].T
    return out


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, upstream: np.ndarray):
    """Gradients of <upstream, conv2d_forward(x)> w.r.t. x, kernel, bias."""
    h, w, cin = x.shape
    cout = kernel.shape[0]
    padded = np.zeros((h + 2, w + 2, cin))
    padded[1:-1, 1:-1] = x
    up = upstream.reshape(h * w, cout)
    grad_kernel = np.empty_like(kernel)
    grad_padded = np.zeros((h + 2, w + 2, cin))
    for di in range(3):
        for dj in range(3):
            window = padded[di:di + h, dj:dj + w].reshape(h * w, cin)
            grad_kernel[:, :, di, dj] = up.T @ window
            grad_padded[di:di + h, dj:dj + w] += (up @ kernel[:, :, di, dj]).reshape(h, w, cin)
    grad_x = grad_padded[1:-1, 1:-1].copy()
    grad_bias = upstream.sum(axis=(0, 1))
    return grad_x, grad_kernel, grad_bias


def max_pool_forward(x: np.ndarray, k: int):
    """k-by-k max pooling with a flat in-window argmax record.

    Ties resolve to the first element in row-major window order (argmax
    semantics of numpy), which the backward pass relies on.
    """
    h, w, c = x.shape
    oh, ow = h // k, w // k
    windows = x.reshape(oh, k, ow, k, c).transpose(0, 2, 1, 3, 4).reshape(oh, ow, k * k, c)
    argmax = windows.argmax(axis=2).astype(np.int64)
    pooled = np.take_along_axis(windows, argmax[:, :, None, :], axis=2)[:, :, 0, :]
    return np.ascontiguousarray(pooled), argmax


def max_pool_backward(argmax: np.ndarray, upstream: np.ndarray, k: int) -> np.ndarray:
    """Scatter upstream gradient back to the recorded argmax positions."""
    oh, ow, c = argmax.shape
    scattered = np.zeros((oh, ow, k * k, c))
    np.put_along_axis(scattered, argmax[:, :, None, :], upstream[:, :, None, :], axis=2)
    return np.ascontiguousarray(
        scattered.reshape(oh, ow, k, k, c).transpose(0, 2, 1, 3, 4).reshape(oh * k, ow * k, c)
    )


def pairwise_distances(s: np.ndarray, t: np.ndarray, kind: int) -> np.ndarray:
    """Batched pairwise distances: (B, n, d) x (B, m, d) -> (B, n, m).

    L2 is the squared Euclidean distance; cosine is 1 - cosine similarity
    (callers guarantee nonzero rows for the cosine kind).
    """
    if kind == DIST_L2:
        sn = np.einsum("bnd,bnd->bn", s, s)
        tn = np.einsum("bmd,bmd->bm", t, t)
        d = sn[:, :, None] + tn[:, None, :] - 2.0 * (s @ t.transpose(0, 2, 1))
        np.maximum(d, 0.0, out=d)
        return d
    if kind == DIST_L1:
        b, n, dim = s.shape
        m = t.shape[1]
        out = np.empty((b, n, m))
        block = max(1, _L1_CHUNK // max(1, m * dim))
        for i in range(b):
            for r0 in range(0, n, block):
                r1 = min(n, r0 + block)
                out[i, r0:r1] = np.abs(s[i, r0:r1, None, :] - t[i, None, :, :]).sum(axis=2)
        return out
    if kind == DIST_COSINE:
        sn = np.linalg.norm(s, axis=2)
        tn = np.linalg.norm(t, axis=2)
        shat = s / sn[:, :, None]
        that = t / tn[:, :, None]
        return 1.0 - shat @ that.transpose(0, 2, 1)
    raise ValueError(f"unknown distance kind code {kind}")


def pairwise_distances_backward(s: np.ndarray, t: np.ndarray, g: np.ndarray, kind: int) -> np.ndarray:
    """Gradient w.r.t. s of sum_ij g[b,i,j] * d(s[b,i], t[b,j])."""
    if kind == DIST_L2:
        rows = g.sum(axis=2)
        return 2.0 * (s * rows[:, :, None] - g @ t)
    if kind == DIST_L1:
        b, n, dim = s.shape
        out = np.empty_like(s)
        m = t.shape[1]
        block = max(1, _L1_CHUNK // max(1, m * dim))
        for i in range(b):
            for r0 in range(0, n, block):
                r1 = min(n, r0 + block)
                signs = np.sign(s[i, r0:r1, None, :] - t[i, None, :, :])
                out[i, r0:r1] = np.einsum("rj,rjd->rd", g[i, r0:r1], signs)
        return out
    if kind == DIST_COSINE:
        sn = np.linalg.norm(s, axis=2)
        tn = np.linalg.norm(t, axis=2)
        shat = s / sn[:, :, None]
        that = t / tn[:, :, None]
        cosmat = shat @ that.transpose(0, 2, 1)
        weighted = g / tn[:, None, :]
        term1 = -(weighted @ t) / sn[:, :, None]
        csum = (g * cosmat).sum(axis=2)
        term2 = s * (csum / (sn * sn))[:, :, None]
        return term1 + term2
    raise ValueError(f"unknown distance kind code {kind}")
