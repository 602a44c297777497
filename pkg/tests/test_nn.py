"""Forward/backward checks for the small conv toolkit."""
import numpy as np
import pytest

from afdcd import nn, oracle
from afdcd.errors import ParameterError, ShapeError


def random_layer(rng, cin, cout):
    return nn.ConvLayer(
        kernel=rng.uniform(-0.3, 0.3, (cout, cin, 3, 3)),
        bias=rng.uniform(-0.1, 0.1, cout),
    )


def test_conv2d_matches_bruteforce(rng):
    x = rng.uniform(-1, 1, (5, 7, 3))
    layer = random_layer(rng, 3, 4)
    out = nn.conv2d(x, layer)
    ref = oracle.conv_bruteforce(x, layer)
    assert out.shape == (5, 7, 4)
    assert np.abs(out - ref).max() < 1e-12


def test_conv2d_identity_kernel(rng):
    x = rng.uniform(-1, 1, (6, 6, 2))
    kernel = np.zeros((2, 2, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    kernel[1, 1, 1, 1] = 1.0
    layer = nn.ConvLayer(kernel=kernel, bias=np.zeros(2))
    assert np.abs(nn.conv2d(x, layer) - x).max() == 0.0


def test_conv2d_grad_finite_diff(rng):
    x = rng.uniform(-1, 1, (4, 5, 2))
    layer = random_layer(rng, 2, 3)
    probe = rng.uniform(-1, 1, (4, 5, 3))

    gx, gk, gb = nn.conv2d_grad(x, layer, probe)
    fx = oracle.grad_finite_diff(lambda z: float((nn.conv2d(z, layer) * probe).sum()), x)
    fk = oracle.grad_finite_diff(
        lambda k: float((nn.conv2d(x, nn.ConvLayer(k, layer.bias)) * probe).sum()),
        layer.kernel,
    )
    fb = oracle.grad_finite_diff(
        lambda b: float((nn.conv2d(x, nn.ConvLayer(layer.kernel, b)) * probe).sum()),
        layer.bias,
    )
    assert oracle.relative_error(gx, fx) < 1e-6
    assert oracle.relative_error(gk, fk) < 1e-6
    assert oracle.relative_error(gb, fb) < 1e-6


def test_conv2d_rejects_bad_shapes(rng):
    layer = random_layer(rng, 3, 4)
    with pytest.raises(ShapeError):
        nn.conv2d(rng.uniform(size=(5, 5, 2)), layer)
    with pytest.raises(ShapeError):
        nn.conv2d(rng.uniform(size=(5, 5)), layer)


def test_relu_and_grad():
    x = np.array([[-1.0, 0.0], [2.0, -3.0]])[:, :, None]
    up = np.ones_like(x)
    assert np.array_equal(nn.relu(x)[:, :, 0], [[0.0, 0.0], [2.0, 0.0]])
    # gradient passes only where the input was strictly positive
    assert np.array_equal(nn.relu_grad(x, up)[:, :, 0], [[0.0, 0.0], [1.0, 0.0]])


def test_max_pool_matches_bruteforce(rng):
    x = rng.uniform(-1, 1, (8, 12, 5))
    pooled, argmax = nn.max_pool(x, 4)
    ref_pooled, ref_argmax = oracle.max_pool_bruteforce(x, 4)
    assert pooled.shape == (2, 3, 5)
    assert np.abs(pooled - ref_pooled).max() == 0.0
    assert np.array_equal(argmax, ref_argmax)


def test_max_pool_tie_takes_first():
    x = np.full((2, 2, 1), 3.5)
    _, argmax = nn.max_pool(x, 2)
    assert argmax[0, 0, 0] == 0


def test_max_pool_grad_scatters_to_argmax(rng):
    x = rng.uniform(-1, 1, (4, 4, 2))
    pooled, argmax = nn.max_pool(x, 2)
    up = rng.uniform(-1, 1, pooled.shape)
    gx = nn.max_pool_grad(argmax, up, 2)
    assert gx.shape == x.shape
    # every upstream value lands exactly once, on the window max
    assert np.isclose(gx.sum(), up.sum())
    assert np.count_nonzero(gx) == up.size
    for oi in range(2):
        for oj in range(2):
            for c in range(2):
                flat = argmax[oi, oj, c]
                i, j = 2 * oi + flat // 2, 2 * oj + flat % 2
                assert gx[i, j, c] == up[oi, oj, c]
                assert x[i, j, c] == pooled[oi, oj, c]


def test_softmax_xent_uniform_logits():
    logits = np.zeros((2, 2, 4))
    labels = np.zeros((2, 2), dtype=np.int64)
    loss, grad = nn.softmax_xent(logits, labels)
    assert abs(loss - np.log(4.0)) < 1e-12
    # (softmax - onehot) / pixel count
    assert abs(grad[0, 0, 0] - (0.25 - 1.0) / 4.0) < 1e-12
    assert abs(grad[0, 0, 1] - 0.25 / 4.0) < 1e-12


def test_softmax_xent_ignore_index():
    logits = np.zeros((1, 2, 3))
    labels = np.array([[0, nn.IGNORE_INDEX]], dtype=np.int64)
    loss, grad = nn.softmax_xent(logits, labels)
    assert abs(loss - np.log(3.0)) < 1e-12
    assert np.all(grad[0, 1] == 0.0)

    all_ignored = np.full((1, 2), nn.IGNORE_INDEX, dtype=np.int64)
    loss, grad = nn.softmax_xent(logits, all_ignored)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_softmax_xent_rejects_out_of_range_label():
    logits = np.zeros((1, 1, 3))
    with pytest.raises(ParameterError):
        nn.softmax_xent(logits, np.array([[3]], dtype=np.int64))


def test_softmax_xent_grad_finite_diff(rng):
    logits = rng.uniform(-2, 2, (3, 3, 5))
    labels = rng.integers(0, 5, (3, 3))
    _, grad = nn.softmax_xent(logits, labels)
    ref = oracle.grad_finite_diff(lambda z: nn.softmax_xent(z, labels)[0], logits)
    assert oracle.relative_error(grad, ref) < 1e-6


def test_sgd_step_momentum():
    p = np.array([1.0, 2.0])
    g = np.array([0.5, -0.5])
    v = np.zeros(2)
    nn.sgd_step([p], [g.copy()], [v], lr=0.1, momentum=0.9)
    assert np.allclose(p, [1.0 - 0.05, 2.0 + 0.05])
    nn.sgd_step([p], [g.copy()], [v], lr=0.1, momentum=0.9)
    # velocity carries: v2 = 0.9*g + g
    assert np.allclose(p, [0.95 - 0.1 * 0.95, 2.05 + 0.1 * 0.95])
