"""Count profiles, synthetic generation, augmentations, dump/load."""

import numpy as np
import pytest

from bislab.data import (
    Dataset,
    LongTailSpec,
    class_count_profile,
    dump_dataset,
    load_dataset,
    make_synthetic,
    strong_augment,
    unlabeled_count_profile,
    weak_augment,
)
from bislab.errors import ConfigError


def test_profile_ten_class_heavy_tail():
    counts = class_count_profile(10, 1500, 100)
    np.testing.assert_array_equal(
        counts, [1500, 899, 539, 323, 194, 116, 70, 42, 25, 15]
    )


def test_profile_five_class():
    np.testing.assert_array_equal(class_count_profile(5, 100, 20), [100, 47, 22, 11, 5])


def test_profile_balanced_when_ratio_one():
    np.testing.assert_array_equal(class_count_profile(5, 100, 1), [100] * 5)


def test_profile_two_class_endpoints():
    np.testing.assert_array_equal(class_count_profile(2, 1500, 100), [1500, 15])


def test_profile_rejects_vanishing_tail():
    with pytest.raises(ConfigError):
        class_count_profile(5, 10, 25)  # tail would round to 0


def test_profile_properties():
    rng = np.random.default_rng(11)
    for _ in range(100):
        k = int(rng.integers(2, 12))
        lam = float(rng.uniform(1.0, 20.0))
        # keep the tail >= 1 even after the lam**2 comparison below
        n1 = int(rng.integers(int(2 * lam * lam) + 1, 6000))
        counts = class_count_profile(k, n1, lam)
        assert counts[0] == n1
        assert counts[-1] == int(np.floor(n1 / lam + 0.5))
        assert np.all(np.diff(counts) <= 0)  # non-increasing
        # squaring the imbalance never raises a non-head count
        harder = class_count_profile(k, n1, lam * lam)
        assert np.all(harder[1:] <= counts[1:])
        assert harder[0] == counts[0]


def test_unlabeled_profile_examples():
    np.testing.assert_array_equal(unlabeled_count_profile(np.array([1500, 15]), 2), [3000, 30])
    np.testing.assert_array_equal(
        unlabeled_count_profile(np.array([100, 47, 22, 11, 5]), 2), [200, 94, 44, 22, 10]
    )
    np.testing.assert_array_equal(unlabeled_count_profile(np.array([100, 50, 10]), 0.5), [50, 25, 5])
    counts = np.array([7, 3, 2])
    np.testing.assert_array_equal(unlabeled_count_profile(counts, 1.0), counts)
    with pytest.raises(ConfigError):
        unlabeled_count_profile(counts, 0.0)


def test_unlabeled_profile_shares_skew():
    rng = np.random.default_rng(21)
    for _ in range(100):
        k = int(rng.integers(2, 10))
        lam = float(rng.uniform(1.0, 30.0))
        n1 = int(rng.integers(int(2 * lam) + 1, 2000))
        beta = float(rng.uniform(0.25, 4.0))
        labeled = class_count_profile(k, n1, lam)
        unlabeled = unlabeled_count_profile(labeled, beta)
        # rounding slack: per-class ratio within 1/labeled_count of beta
        slack = 1.0 / labeled
        assert np.all(np.abs(unlabeled / labeled - beta) <= slack + 1e-12)


def test_spec_validation():
    with pytest.raises(ConfigError):
        LongTailSpec(k=1)
    with pytest.raises(ConfigError):
        LongTailSpec(lam=0.5)
    with pytest.raises(ConfigError):
        LongTailSpec(beta=0.0)
    with pytest.raises(ConfigError):
        LongTailSpec(n1=10, lam=25.0)  # tail rounds to zero
    with pytest.raises(ConfigError):
        LongTailSpec(class_sep=0.0)


def test_make_synthetic_balanced_case():
    spec = LongTailSpec(k=2, n1=10, lam=1.0, beta=1.0, dim=2)
    ds = make_synthetic(spec, seed=0)
    labeled, unlabeled, test = ds
    np.testing.assert_array_equal(labeled.class_counts, [10, 10])
    np.testing.assert_array_equal(np.bincount(unlabeled.hidden_labels), [10, 10])
    np.testing.assert_array_equal(test.class_counts, [200, 200])
    assert labeled.points.shape == (20, 2)


def test_make_synthetic_longtail_counts():
    ds = make_synthetic(LongTailSpec(k=5, n1=100, lam=20.0, beta=2.0), seed=3)
    np.testing.assert_array_equal(ds.labeled.class_counts, [100, 47, 22, 11, 5])
    np.testing.assert_array_equal(
        np.bincount(ds.unlabeled.hidden_labels, minlength=5), [200, 94, 44, 22, 10]
    )
    assert len(ds.unlabeled) == 370


def test_make_synthetic_deterministic():
    spec = LongTailSpec()
    a = make_synthetic(spec, seed=42)
    b = make_synthetic(spec, seed=42)
    np.testing.assert_array_equal(a.labeled.points, b.labeled.points)
    np.testing.assert_array_equal(a.unlabeled.points, b.unlabeled.points)
    np.testing.assert_array_equal(a.test.points, b.test.points)
    np.testing.assert_array_equal(a.class_means, b.class_means)
    c = make_synthetic(spec, seed=43)
    assert not np.array_equal(a.labeled.points, c.labeled.points)


def test_rng_streams_are_separated():
    # changing beta regenerates unlabeled only; test/labeled/means stay put
    base = LongTailSpec(beta=1.0)
    wide = LongTailSpec(beta=3.0)
    a = make_synthetic(base, seed=9)
    b = make_synthetic(wide, seed=9)
    np.testing.assert_array_equal(a.class_means, b.class_means)
    np.testing.assert_array_equal(a.labeled.points, b.labeled.points)
    np.testing.assert_array_equal(a.test.points, b.test.points)
    assert len(b.unlabeled) == 3 * len(a.unlabeled)


def test_class_means_on_separation_sphere():
    spec = LongTailSpec(class_sep=2.5, dim=6)
    ds = make_synthetic(spec, seed=1)
    norms = np.linalg.norm(ds.class_means, axis=1)
    np.testing.assert_allclose(norms, np.full(spec.k, 2.5), atol=1e-12)


def test_per_class_index_matches_labels():
    ds = make_synthetic(LongTailSpec(), seed=5)
    for j, idx in enumerate(ds.labeled.per_class_index):
        assert np.all(ds.labeled.labels[idx] == j)
    assert sum(idx.size for idx in ds.labeled.per_class_index) == len(ds.labeled)


def test_weak_augment_zero_sigma_is_identity():
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = weak_augment(x, np.random.default_rng(0), sigma=0.0)
    np.testing.assert_array_equal(out, x)
    assert out is not x


def test_weak_augment_noise_scale():
    rng = np.random.default_rng(2)
    x = np.zeros((4000, 3))
    out = weak_augment(x, rng, sigma=0.05)
    assert abs(out.std() - 0.05) < 0.005


def test_strong_augment_full_drop_zeroes_everything():
    x = np.ones((5, 7))
    out = strong_augment(x, np.random.default_rng(0), sigma=0.5, p_drop=1.0)
    np.testing.assert_array_equal(out, np.zeros_like(x))


def test_strong_augment_drop_fraction():
    rng = np.random.default_rng(3)
    x = np.ones((300, 50))
    out = strong_augment(x, rng, sigma=0.01, p_drop=0.1)
    dropped = np.mean(out == 0.0)
    assert abs(dropped - 0.1) < 0.01


def test_augment_deterministic_under_seed():
    x = np.linspace(-1, 1, 24).reshape(4, 6)
    a = strong_augment(x, np.random.default_rng(7), sigma=0.5, p_drop=0.1)
    b = strong_augment(x, np.random.default_rng(7), sigma=0.5, p_drop=0.1)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ConfigError):
        strong_augment(x, np.random.default_rng(7), sigma=0.5, p_drop=1.5)


def test_dump_load_round_trip(tmp_path):
    ds = make_synthetic(LongTailSpec(k=3, n1=20, lam=4.0, beta=1.5, dim=4), seed=17,
                        test_per_class=8)
    path = tmp_path / "data.csv"
    dump_dataset(ds, path)
    back = load_dataset(path)
    assert isinstance(back, Dataset)
    assert back.spec == ds.spec
    np.testing.assert_array_equal(back.labeled.points, ds.labeled.points)
    np.testing.assert_array_equal(back.labeled.labels, ds.labeled.labels)
    np.testing.assert_array_equal(back.unlabeled.points, ds.unlabeled.points)
    np.testing.assert_array_equal(back.unlabeled.hidden_labels, ds.unlabeled.hidden_labels)
    np.testing.assert_array_equal(back.test.points, ds.test.points)
    np.testing.assert_array_equal(back.test.labels, ds.test.labels)
    np.testing.assert_array_equal(back.class_means, ds.class_means)


def test_dump_is_byte_stable(tmp_path):
    ds = make_synthetic(LongTailSpec(k=2, n1=5, lam=1.0, beta=1.0, dim=2), seed=1,
                        test_per_class=3)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    dump_dataset(ds, p1)
    dump_dataset(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()
