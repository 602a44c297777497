"""Spatial masks and the two-conv reconstruction generator."""
import numpy as np
import pytest

from afdcd import masking, oracle
from afdcd.errors import ParameterError


def test_sample_mask_bernoulli_stats(rng):
    mask = masking.sample_mask(64, 64, 0.75, rng)
    assert mask.bits.shape == (64, 64)
    assert set(np.unique(mask.bits)) <= {0.0, 1.0}
    dropped = 1.0 - mask.bits.mean()
    sigma = np.sqrt(0.75 * 0.25 / (64 * 64))
    assert abs(dropped - 0.75) < 3 * sigma


def test_sample_mask_exact_count(rng):
    mask = masking.sample_mask(10, 10, 0.37, rng, method="exact")
    assert int(100 - mask.bits.sum()) == round(0.37 * 100)


def test_sample_mask_zero_ratio_keeps_everything(rng):
    mask = masking.sample_mask(8, 8, 0.0, rng, method="exact")
    assert mask.bits.min() == 1.0


def test_sample_mask_rejects_bad_ratio(rng):
    with pytest.raises(ParameterError):
        masking.sample_mask(4, 4, 1.0, rng)
    with pytest.raises(ParameterError):
        masking.sample_mask(4, 4, -0.1, rng)
    with pytest.raises(ParameterError):
        masking.sample_mask(4, 4, 0.5, rng, method="poisson")


def test_apply_mask_zeros_all_channels(rng):
    f = rng.uniform(1.0, 2.0, (4, 4, 3))
    mask = masking.sample_mask(4, 4, 0.5, rng, method="exact")
    masked = masking.apply_mask(f, mask)
    off = mask.bits == 0.0
    assert np.all(masked[off] == 0.0)
    assert np.array_equal(masked[~off], f[~off])


def test_generator_init_shapes_and_bounds(rng):
    params = masking.generator_init(8, 32, rng)
    k1, b1, k2, b2 = params.param_list()
    assert k1.shape == (32, 8, 3, 3)
    assert k2.shape == (32, 32, 3, 3)
    assert np.all(b1 == 0.0) and np.all(b2 == 0.0)
    assert np.abs(k1).max() <= np.sqrt(1.0 / (9 * 8))
    assert np.abs(k2).max() <= np.sqrt(1.0 / (9 * 32))


def test_generator_forward_restores_channel_count(rng):
    params = masking.generator_init(4, 12, rng)
    out = masking.generator_forward(rng.uniform(size=(6, 6, 4)), params)
    assert out.shape == (6, 6, 12)


def test_generator_backward_finite_diff(rng):
    params = masking.generator_init(3, 5, rng)
    x = rng.uniform(-1, 1, (4, 4, 3))
    probe = rng.uniform(-1, 1, (4, 4, 5))

    out, cache = masking.generator_forward_cache(x, params)
    assert np.array_equal(out, masking.generator_forward(x, params))
    gx, grads = masking.generator_backward(cache, params, probe)

    fx = oracle.grad_finite_diff(
        lambda z: float((masking.generator_forward(z, params) * probe).sum()), x
    )
    assert oracle.relative_error(gx, fx) < 1e-6

    tensors = params.param_list()
    for tensor, grad in zip(tensors, grads):
        def with_value(value, target=tensor):
            saved = target.copy()
            target[...] = value
            try:
                return float((masking.generator_forward(x, params) * probe).sum())
            finally:
                target[...] = saved

        ref = oracle.grad_finite_diff(with_value, tensor)
        assert oracle.relative_error(grad, ref) < 1e-6


def test_generator_zero_input_passes_bias_path(rng):
    params = masking.generator_init(2, 4, rng)
    out = masking.generator_forward(np.zeros((3, 3, 2)), params)
    # zero input, zero biases: nothing propagates
    assert np.all(out == 0.0)
