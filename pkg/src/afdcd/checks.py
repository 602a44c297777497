"""Randomized verification suites: optimized losses against brute-force
enumeration, and analytical gradients against central finite differences.

Instance generators steer clear of the measure-zero nondifferentiable sets
(max-pool ties, L1 kinks, ReLU boundaries, zero vectors under cosine) by
rejection sampling with explicit margins, so a finite-difference step of
1e-5 never straddles a kink.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses, masking, nn, oracle, partition
from .losses import ContrastConfig, DistanceKind
from .oracle import FiniteDiffSpec

POOL_GAP = 1e-3
COORD_GAP = 1e-4
RELU_GAP = 1e-3
REDRAW_LIMIT = 200

# Central differences at epsilon=1e-5 carry ~|f|*2.2e-16/(2e-5) = |f|*1.1e-11
# of roundoff noise. Coordinates whose true gradient is exactly zero (the L1
# losses have shift-invariant directions) would read as mismatches against
# that noise, so differences below this floor are treated as agreement.
FD_NOISE_FLOOR = 1e-9


def fd_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    """Worst relative error against a finite-difference reference,
    discounting differences below the reference's own noise floor."""
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    diff = np.abs(analytic - fd)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-8)
    rel = np.where(diff < FD_NOISE_FLOOR, 0.0, diff / denom)
    return float(rel.max())


def pool_gap_ok(x: np.ndarray, k: int, gap: float = POOL_GAP) -> bool:
    """Whether every k-by-k pooling window has a top-2 margin of at least gap."""
    if k == 1:
        return True
    h, w, c = x.shape
    windows = (
        x.reshape(h // k, k, w // k, k, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(-1, k * k, c)
    )
    top2 = np.partition(windows, k * k - 2, axis=1)[:, -2:, :]
    return bool((top2[:, 1, :] - top2[:, 0, :]).min() >= gap)


def well_separated_map(
    rng: np.random.Generator, shape: tuple[int, int, int], k: int, gap: float = POOL_GAP
) -> np.ndarray:
    """Uniform map whose k-by-k pooling windows have a clear top-2 margin."""
    for _ in range(REDRAW_LIMIT):
        x = rng.uniform(-0.5, 0.5, shape)
        if pool_gap_ok(x, k, gap):
            return x
    raise RuntimeError("could not draw a tie-separated map")


def _signed_map(rng: np.random.Generator, shape) -> np.ndarray:
    """Coordinates with magnitude >= 0.3: keeps cosine norms off zero."""
    return rng.uniform(0.3, 1.0, shape) * rng.choice([-1.0, 1.0], shape)


def _min_coord_gap(s: np.ndarray, t: np.ndarray) -> float:
    """Smallest |s - t| over matched coordinates of all cross pairs."""
    return float(np.abs(s[:, :, None, :] - t[:, None, :, :]).min())


def _draw_pair(
    rng: np.random.Generator,
    shape: tuple[int, int, int],
    kind: DistanceKind,
    view,
    pool_factor: int = 1,
    coupling: str = "independent",
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (Fs, Ft) safe for finite differences under the given contrast view.

    `view` maps a (possibly pooled) map to its (B, n, d) sample batches; the
    L1 kink margin is enforced on exactly those batches; the pooling tie
    margin is enforced on both raw maps.
    """
    for _ in range(REDRAW_LIMIT):
        if kind is DistanceKind.COSINE:
            fs, ft = _signed_map(rng, shape), _signed_map(rng, shape)
        else:
            fs = rng.uniform(-0.5, 0.5, shape)
            ft = rng.uniform(-0.5, 0.5, shape)
        if not (pool_gap_ok(fs, pool_factor) and pool_gap_ok(ft, pool_factor)):
            continue
        if kind is not DistanceKind.L1:
            return fs, ft
        ps, pt, _ = partition.pool_pre_reduce(fs, ft, pool_factor, coupling)
        if _min_coord_gap(view(ps), view(pt)) >= COORD_GAP:
            return fs, ft
    raise RuntimeError("could not draw a kink-separated pair")


_ORACLE_SHAPES = [(2, 2, 4), (3, 4, 6), (4, 4, 8), (6, 6, 12), (8, 8, 16)]


@dataclass
class SuiteReport:
    name: str
    instances: int = 0
    worst: float = 0.0
    failures: list[str] = field(default_factory=list)

    def record(self, err: float, tol: float, detail: str) -> None:
        self.instances += 1
        if err > self.worst:
            self.worst = err
        if err >= tol:
            self.failures.append(f"{detail}: error {err:.3e}")

    @property
    def ok(self) -> bool:
        return not self.failures


def _divisors(c: int, lo: int, hi: int) -> list[int]:
    return [m for m in range(lo, hi + 1) if c % m == 0]


def run_oracle_suite(
    trials: int = 100, seed: int = 0, tol: float = 1e-10
) -> list[SuiteReport]:
    """Compare loss_sc/loss_cc/loss_oc against brute-force enumeration.

    Each family gets `trials` random instances spanning the three distance
    kinds, both denominator conventions, and pool factors 1 and 2 for the
    patch-wise loss.
    """
    rng = np.random.default_rng(seed)
    kinds = list(DistanceKind)
    reports = [SuiteReport("sc"), SuiteReport("cc"), SuiteReport("oc")]
    sc_rep, cc_rep, oc_rep = reports

    for trial in range(trials):
        kind = kinds[trial % 3]
        tau = float(rng.uniform(0.25, 1.0))
        include = bool(rng.integers(0, 2))
        draw = _signed_map if kind is DistanceKind.COSINE else (
            lambda r, s: r.uniform(-0.5, 0.5, s)
        )

        shape = _ORACLE_SHAPES[int(rng.integers(0, len(_ORACLE_SHAPES)))]
        fs, ft = draw(rng, shape), draw(rng, shape)
        got, _ = losses.loss_sc(fs, ft, tau, kind, include)
        want = oracle.sc_bruteforce(fs, ft, tau, kind, include)
        sc_rep.record(abs(got - want), tol, f"sc {shape} {kind.value} tau={tau:.3f}")

        shape = _ORACLE_SHAPES[int(rng.integers(0, len(_ORACLE_SHAPES)))]
        m = int(rng.choice(_divisors(shape[2], 2, shape[2])))
        fs, ft = draw(rng, shape), draw(rng, shape)
        got, _ = losses.loss_cc(fs, ft, m, tau, kind, include)
        want = oracle.cc_bruteforce(fs, ft, m, tau, kind, include)
        cc_rep.record(abs(got - want), tol, f"cc {shape} M={m} {kind.value}")

        q = 1 if trial % 2 == 0 else 2
        h = int(rng.choice([4, 8])) if q == 2 else int(rng.choice([2, 4, 6, 8]))
        c = int(rng.choice([4, 8, 16]))
        shape = (h, h, c)
        hp = h // q
        n = int(rng.choice([s for s in (1, 2, 4) if hp % s == 0]))
        m = int(rng.choice(_divisors(c, 1, 8)))
        if n * n * m < 2:
            m = max(d for d in _divisors(c, 1, 8))
        cfg = ContrastConfig(
            tau=tau, channel_groups=m, patch_side=n, pool_factor=q,
            distance=kind, include_positive_in_denominator=include,
        )
        fs, ft = draw(rng, shape), draw(rng, shape)
        got, _ = losses.loss_oc(fs, ft, cfg)
        want = oracle.oc_bruteforce(fs, ft, cfg)
        oc_rep.record(
            abs(got - want), tol, f"oc {shape} n={n} M={m} q={q} {kind.value}"
        )
    return reports


def run_grad_suite(
    trials: int = 20, seed: int = 0, spec: FiniteDiffSpec | None = None
) -> list[SuiteReport]:
    """Check every analytical gradient against central finite differences."""
    if spec is None:
        spec = FiniteDiffSpec()
    rng = np.random.default_rng(seed)
    tol = spec.tolerance
    kinds = list(DistanceKind)

    fd_rep = SuiteReport("l_fd")
    sc_rep = SuiteReport("loss_sc")
    cc_rep = SuiteReport("loss_cc")
    oc_rep = SuiteReport("loss_oc")
    kd_rep = SuiteReport("loss_kd")
    xent_rep = SuiteReport("softmax_xent")
    gen_rep = SuiteReport("generator_forward")

    for trial in range(trials):
        kind = kinds[trial % 3]
        tau = float(rng.uniform(0.25, 1.0))
        include = bool(rng.integers(0, 2))

        ft = rng.uniform(-0.5, 0.5, (4, 4, 4))
        fs = rng.uniform(-0.5, 0.5, (4, 4, 4))
        _, grad = losses.l_fd(ft, fs)
        ref = oracle.grad_finite_diff(lambda z: losses.l_fd(ft, z)[0], fs, spec)
        fd_rep.record(fd_error(grad, ref), tol, f"l_fd trial {trial}")

        shape = (4, 4, 8)
        fs, ft = _draw_pair(
            rng, shape, kind, lambda p: p.reshape(1, 16, 8)
        )
        _, grad = losses.loss_sc(fs, ft, tau, kind, include)
        ref = oracle.grad_finite_diff(
            lambda z: losses.loss_sc(z, ft, tau, kind, include)[0], fs, spec
        )
        sc_rep.record(fd_error(grad, ref), tol, f"sc {kind.value}")

        m = 4
        fs, ft = _draw_pair(
            rng, shape, kind, lambda p: p.reshape(16, m, 2)
        )
        _, grad = losses.loss_cc(fs, ft, m, tau, kind, include)
        ref = oracle.grad_finite_diff(
            lambda z: losses.loss_cc(z, ft, m, tau, kind, include)[0], fs, spec
        )
        cc_rep.record(fd_error(grad, ref), tol, f"cc {kind.value}")

        q = 1 if trial % 2 == 0 else 2
        n, m = 2, 4
        cfg = ContrastConfig(
            tau=tau, channel_groups=m, patch_side=n, pool_factor=q,
            distance=kind, include_positive_in_denominator=include,
        )
        shape = (8, 8, 8)
        length = shape[2] // m

        def oc_view(p: np.ndarray) -> np.ndarray:
            grid, patches = partition.split_patches(p, n, n)
            return patches.reshape(grid.count, n * n * m, length)

        fs, ft = _draw_pair(rng, shape, kind, oc_view, pool_factor=q)
        _, grad = losses.loss_oc(fs, ft, cfg)
        ref = oracle.grad_finite_diff(
            lambda z: losses.loss_oc(z, ft, cfg)[0], fs, spec
        )
        oc_rep.record(fd_error(grad, ref), tol, f"oc {kind.value} q={q}")

        temp = float(rng.uniform(1.0, 5.0))
        sl = rng.uniform(-1.0, 1.0, (4, 4, 5))
        tl = rng.uniform(-1.0, 1.0, (4, 4, 5))
        _, grad = losses.loss_kd(sl, tl, temp)
        ref = oracle.grad_finite_diff(
            lambda z: losses.loss_kd(z, tl, temp)[0], sl, spec
        )
        kd_rep.record(fd_error(grad, ref), tol, f"kd T={temp:.2f}")

        logits = rng.uniform(-1.0, 1.0, (4, 4, 3))
        labels = rng.integers(0, 3, (4, 4))
        labels[rng.random((4, 4)) < 0.2] = nn.IGNORE_INDEX
        _, grad = nn.softmax_xent(logits, labels)
        ref = oracle.grad_finite_diff(
            lambda z: nn.softmax_xent(z, labels)[0], logits, spec
        )
        xent_rep.record(fd_error(grad, ref), tol, f"xent trial {trial}")

        gen_rep.record(*_generator_check(rng, spec), f"generator trial {trial}")

    return [fd_rep, sc_rep, cc_rep, oc_rep, kd_rep, xent_rep, gen_rep]


def _generator_check(
    rng: np.random.Generator, spec: FiniteDiffSpec
) -> tuple[float, float]:
    """Worst relative error of the generator backward over input and params."""
    cs, ct = 3, 6
    for _ in range(REDRAW_LIMIT):
        params = masking.generator_init(cs, ct, rng)
        x = rng.uniform(-0.5, 0.5, (4, 4, cs))
        pre1 = nn.conv2d(x, params.conv1)
        if np.abs(pre1).min() >= RELU_GAP:
            break
    probe = rng.uniform(-1.0, 1.0, (4, 4, ct))

    def scalar(out: np.ndarray) -> float:
        return float((out * probe).sum())

    out, cache = masking.generator_forward_cache(x, params)
    grad_x, grads = masking.generator_backward(cache, params, probe)
    worst = fd_error(
        grad_x,
        oracle.grad_finite_diff(
            lambda z: scalar(masking.generator_forward(z, params)), x, spec
        ),
    )
    tensors = [
        params.conv1.kernel, params.conv1.bias, params.conv2.kernel, params.conv2.bias,
    ]
    for slot, (tensor, grad) in enumerate(zip(tensors, grads)):
        def eval_at(value: np.ndarray) -> float:
            saved = tensor.copy()
            tensor[...] = value
            try:
                return scalar(masking.generator_forward(x, params))
            finally:
                tensor[...] = saved
        ref = oracle.grad_finite_diff(eval_at, tensor, spec)
        worst = max(worst, fd_error(grad, ref))
    return worst, spec.tolerance
