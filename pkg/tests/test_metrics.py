"""Distance distributions, histograms, and segmentation scoring."""
import numpy as np
import pytest

from afdcd import metrics
from afdcd.errors import DegenerateInputError, ParameterError, ShapeError

from conftest import make_pair


def enumerate_ts(fs, ft, m):
    """Loop transcription of the matching-pair distance set."""
    h, w, c = fs.shape
    length = c // m
    out = []
    for i in range(h):
        for j in range(w):
            for k in range(m):
                a = fs[i, j, k * length:(k + 1) * length]
                b = ft[i, j, k * length:(k + 1) * length]
                out.append(float(((a - b) ** 2).sum()))
    return np.array(out)


def enumerate_selfsim(f, window, m):
    """Loop transcription of within-window pairwise distances."""
    h, w, c = f.shape
    length = c // m
    out = []
    for bi in range(0, h, window):
        for bj in range(0, w, window):
            reps = []
            for i in range(bi, bi + window):
                for j in range(bj, bj + window):
                    for k in range(m):
                        reps.append(f[i, j, k * length:(k + 1) * length])
            for a in range(len(reps)):
                for b in range(a + 1, len(reps)):
                    out.append(float(((reps[a] - reps[b]) ** 2).sum()))
    return np.array(out)


def test_ts_pair_distances_matches_enumeration(rng):
    fs, ft = make_pair(rng, (4, 6, 8))
    got = metrics.ts_pair_distances(fs, ft, 4)
    want = enumerate_ts(fs, ft, 4)
    assert got.shape == want.shape
    assert np.abs(np.sort(got) - np.sort(want)).max() < 1e-12


def test_ts_pair_distances_identical_maps(rng):
    f = rng.uniform(size=(3, 3, 4))
    assert metrics.ts_pair_distances(f, f.copy(), 2).max() == 0.0


def test_self_similarity_matches_enumeration(rng):
    f = rng.uniform(-1, 1, (4, 4, 6))
    got = metrics.self_similarity_distances(f, 2, 3)
    want = enumerate_selfsim(f, 2, 3)
    assert got.shape == want.shape
    assert np.abs(np.sort(got) - np.sort(want)).max() < 1e-12


def test_self_similarity_pair_count(rng):
    f = rng.uniform(size=(4, 4, 4))
    # 4 tiles of 2x2, each with 4 pixels x 2 groups = 8 reps -> 28 pairs
    got = metrics.self_similarity_distances(f, 2, 2)
    assert got.shape == (4 * 28,)


def test_self_similarity_constant_map_is_zero():
    f = np.full((4, 4, 4), 2.5)
    assert np.abs(metrics.self_similarity_distances(f, 2, 2)).max() == 0.0


def test_distances_reject_indivisible(rng):
    f = rng.uniform(size=(4, 4, 6))
    with pytest.raises(ShapeError):
        metrics.ts_pair_distances(f, f, 4)
    with pytest.raises(ShapeError):
        metrics.self_similarity_distances(f, 3, 2)


def test_subsample_policy_small_population(rng):
    d = rng.uniform(size=1000)
    assert metrics.subsample_distances(d, None, None) is d


def test_subsample_policy_large_population(rng):
    d = rng.uniform(size=metrics.FULL_POPULATION_LIMIT + 1)
    picked = metrics.subsample_distances(d, None, rng)
    assert picked.shape == (metrics.SUBSAMPLE_COUNT,)


def test_subsample_explicit_count(rng):
    d = rng.uniform(size=100)
    picked = metrics.subsample_distances(d, 10, rng)
    assert picked.shape == (10,)
    assert np.isin(picked, d).all()
    with pytest.raises(ParameterError):
        metrics.subsample_distances(d, 101, rng)


def test_histogram_totals(rng):
    d = rng.uniform(0.0, 5.0, 500)
    hist = metrics.histogram_from_distances(d)
    assert hist.counts.sum() == 500
    assert len(hist.bin_edges) == metrics.HISTOGRAM_BINS + 1
    assert abs(hist.mean - d.mean()) < 1e-12
    assert abs(hist.variance - d.var()) < 1e-12
    assert hist.sample_count == 500


def test_histogram_all_zero_distances():
    hist = metrics.histogram_from_distances(np.zeros(10))
    assert hist.counts.sum() == 10
    assert hist.mean == 0.0 and hist.variance == 0.0


def test_histogram_csv_format(rng):
    hist = metrics.histogram_from_distances(rng.uniform(size=50))
    lines = metrics.format_histogram_csv(hist).strip().split("\n")
    assert lines[0] == "bin_lo,bin_hi,count"
    assert lines[-2] == "mean,variance,n"
    assert len(lines) == metrics.HISTOGRAM_BINS + 3
    mean, var, n = lines[-1].split(",")
    assert float(mean) == hist.mean
    assert int(n) == 50


def test_confusion_matrix_counts():
    pred = np.array([[0, 1], [1, 1]])
    label = np.array([[0, 1], [0, 255]])
    conf = metrics.confusion_matrix(pred, label, 2)
    # rows are labels, columns predictions; 255 never counted
    assert conf[0, 0] == 1 and conf[0, 1] == 1 and conf[1, 1] == 1
    assert conf.sum() == 3


def test_confusion_matrix_rejects_range():
    with pytest.raises(ParameterError):
        metrics.confusion_matrix(np.array([[2]]), np.array([[0]]), 2)
    with pytest.raises(ParameterError):
        metrics.confusion_matrix(np.array([[0]]), np.array([[7]]), 2)


def test_miou_perfect_prediction():
    label = np.array([[0, 1], [2, 1]])
    per_class, score = metrics.miou(label, label, 3)
    assert score == 1.0
    assert per_class == [1.0, 1.0, 1.0]


def test_miou_partial_overlap():
    pred = np.array([[0, 0], [1, 1]])
    label = np.array([[0, 1], [1, 1]])
    per_class, score = metrics.miou(pred, label, 2)
    # class 0: inter 1, union 2; class 1: inter 2, union 3
    assert abs(per_class[0] - 0.5) < 1e-12
    assert abs(per_class[1] - 2.0 / 3.0) < 1e-12
    assert abs(score - (0.5 + 2.0 / 3.0) / 2.0) < 1e-12


def test_miou_absent_class_excluded():
    pred = np.array([[0, 0]])
    label = np.array([[0, 0]])
    per_class, score = metrics.miou(pred, label, 3)
    assert per_class[0] == 1.0
    assert np.isnan(per_class[1]) and np.isnan(per_class[2])
    assert score == 1.0


def test_miou_all_ignored_is_degenerate():
    conf = np.zeros((2, 2), dtype=np.int64)
    with pytest.raises(DegenerateInputError):
        metrics.miou_from_confusion(conf)
