"""Synthetic shape dataset generation."""
import numpy as np
import pytest

from afdcd import data
from afdcd.errors import ParameterError


def small_spec(**overrides):
    base = dict(image_size=16, num_classes=4, train_count=6, val_count=3,
                noise_std=0.05, seed=7)
    base.update(overrides)
    return data.ToyDatasetSpec(**base)


def test_same_seed_is_bit_identical():
    a = data.gen_toy_dataset(small_spec())
    b = data.gen_toy_dataset(small_spec())
    assert np.array_equal(a.train.images, b.train.images)
    assert np.array_equal(a.train.labels, b.train.labels)
    assert np.array_equal(a.val.images, b.val.images)


def test_different_seed_differs():
    a = data.gen_toy_dataset(small_spec())
    b = data.gen_toy_dataset(small_spec(seed=8))
    assert not np.array_equal(a.train.images, b.train.images)


def test_noiseless_pixels_match_class_colors():
    ds = data.gen_toy_dataset(small_spec(noise_std=0.0))
    img, lab = ds.train.images[0], ds.train.labels[0]
    for cls in np.unique(lab):
        expect = data.class_color(int(cls), 4)
        picked = img[lab == cls]
        assert np.abs(picked - expect).max() < 1e-12


def test_labels_within_class_range():
    ds = data.gen_toy_dataset(small_spec(train_count=12))
    assert ds.train.labels.min() >= 0
    assert ds.train.labels.max() <= 3
    assert ds.train.images.shape == (12, 16, 16, 3)


def test_every_class_present_in_train():
    ds = data.gen_toy_dataset(small_spec(train_count=8))
    present = np.unique(ds.train.labels)
    assert set(range(4)) <= set(int(c) for c in present)


def test_small_images_generate_without_failure():
    # crowded images drop extra shapes instead of failing
    ds = data.gen_toy_dataset(small_spec(image_size=12, train_count=64, val_count=16))
    assert ds.train.labels.shape == (64, 12, 12)
    assert (ds.train.labels > 0).any(axis=(1, 2)).all()


def test_rejects_bad_spec():
    with pytest.raises(ParameterError):
        data.gen_toy_dataset(small_spec(num_classes=1))
    with pytest.raises(ParameterError):
        data.gen_toy_dataset(small_spec(image_size=8))
    with pytest.raises(ParameterError):
        data.gen_toy_dataset(small_spec(train_count=0))
    with pytest.raises(ParameterError):
        data.gen_toy_dataset(small_spec(noise_std=-0.5))


def test_save_dataset_roundtrip(tmp_path):
    spec = small_spec()
    ds = data.gen_toy_dataset(spec)
    path = tmp_path / "toy.npz"
    data.save_dataset(path, spec, ds)
    loaded = np.load(path)
    assert np.array_equal(loaded["train_images"], ds.train.images)
    assert np.array_equal(loaded["val_labels"], ds.val.labels)
    assert int(loaded["num_classes"]) == 4
