"""Sanity checks on the reference oracles themselves.

The oracles earn trust through hand-computable cases and known
calculus facts, never by comparison against the code they verify.
"""
import math

import numpy as np
import pytest

from afdcd import oracle
from afdcd.errors import NumericError
from afdcd.losses import ContrastConfig

from conftest import make_pair


def test_sc_bruteforce_two_pixel_by_hand():
    # 1x2 map: each pixel has exactly one negative, worked out longhand
    fs = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    ft = np.array([[[1.0, 1.0], [0.0, 0.0]]])
    tau = 0.5

    def term(dpos, dneg):
        return dpos / tau + math.log(math.exp(-dneg / tau))

    # pixel 0: dpos = |(1,0)-(1,1)|^2 = 1, dneg = |(1,0)-(0,0)|^2 = 1
    # pixel 1: dpos = |(0,1)-(0,0)|^2 = 1, dneg = |(0,1)-(1,1)|^2 = 1
    want = 0.5 * (term(1.0, 1.0) + term(1.0, 1.0))
    got = oracle.sc_bruteforce(fs, ft, tau, "l2")
    assert abs(got - want) < 1e-14


def test_cc_bruteforce_constant_map_value():
    fs = np.full((2, 2, 6), 0.4)
    ft = np.full((2, 2, 6), 0.1)
    got = oracle.cc_bruteforce(fs, ft, 3, 0.07, "l2")
    assert abs(got - math.log(2.0)) < 1e-14


def test_oc_bruteforce_constant_map_value():
    fs = np.full((4, 4, 4), 1.0)
    ft = np.full((4, 4, 4), 2.0)
    cfg = ContrastConfig(tau=0.07, channel_groups=2, patch_side=2, pool_factor=1)
    got = oracle.oc_bruteforce(fs, ft, cfg)
    assert abs(got - math.log(2 * 2 * 2 - 1)) < 1e-14


def test_dist_kinds_match_definitions(rng):
    a = rng.uniform(-1, 1, 5)
    b = rng.uniform(-1, 1, 5)
    from afdcd.losses import DistanceKind

    assert abs(oracle._dist(a, b, DistanceKind.L2_SQUARED) - ((a - b) ** 2).sum()) < 1e-14
    assert abs(oracle._dist(a, b, DistanceKind.L1) - np.abs(a - b).sum()) < 1e-14
    cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    assert abs(oracle._dist(a, b, DistanceKind.COSINE) - (1.0 - cos)) < 1e-14


def test_max_pool_bruteforce_first_max():
    x = np.array([[2.0, 2.0], [1.0, 2.0]])[:, :, None]
    pooled, argmax = oracle.max_pool_bruteforce(x, 2)
    assert pooled[0, 0, 0] == 2.0
    assert argmax[0, 0, 0] == 0


def test_grad_finite_diff_quadratic_exact():
    # f(x) = x^T A x has zero third derivative: central differences are
    # exact up to roundoff
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = np.array([0.7, -0.4])
    got = oracle.grad_finite_diff(lambda z: float(z @ a @ z), x)
    want = 2.0 * a @ x
    assert np.abs(got - want).max() < 1e-9


def test_grad_finite_diff_respects_epsilon():
    calls = []
    spec = oracle.FiniteDiffSpec(epsilon=1e-3)
    oracle.grad_finite_diff(lambda z: calls.append(z.copy()) or float(z.sum()),
                            np.zeros(1), spec)
    probes = sorted(float(c[0]) for c in calls)
    assert probes == [-1e-3, 1e-3]


def test_grad_finite_diff_rejects_non_finite():
    with pytest.raises(NumericError):
        oracle.grad_finite_diff(lambda z: float("nan"), np.zeros(2))


def test_relative_error_properties():
    assert oracle.relative_error(np.array([1.0]), np.array([1.0])) == 0.0
    assert abs(oracle.relative_error(np.array([1.1]), np.array([1.0])) - 0.1 / 1.1) < 1e-12
    # tiny values measure against the absolute floor instead of blowing up
    assert oracle.relative_error(np.array([1e-12]), np.array([0.0])) < 1e-3


def test_conv_bruteforce_single_tap(rng):
    from afdcd.nn import ConvLayer

    x = np.zeros((3, 3, 1))
    x[1, 1, 0] = 1.0
    kernel = rng.uniform(-1, 1, (1, 1, 3, 3))
    out = oracle.conv_bruteforce(x, ConvLayer(kernel, np.zeros(1)))
    # a centered impulse reads the kernel back out, flipped by correlation
    assert abs(out[0, 0, 0] - kernel[0, 0, 2, 2]) < 1e-15
    assert abs(out[1, 1, 0] - kernel[0, 0, 1, 1]) < 1e-15
    assert abs(out[2, 2, 0] - kernel[0, 0, 0, 0]) < 1e-15


def test_bruteforce_include_positive_flag(rng):
    fs, ft = make_pair(rng, (2, 2, 3))
    excl = oracle.sc_bruteforce(fs, ft, 0.5, "l2")
    incl = oracle.sc_bruteforce(fs, ft, 0.5, "l2", include_positive=True)
    assert incl > excl
