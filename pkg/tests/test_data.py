import gzip

import numpy as np
import pytest

from gramlab.data import (
    Dataset,
    corrupt_labels,
    fit_standardizer,
    load_cifar,
    load_cifar_binary,
    load_idx,
    load_mnist,
    mod_add,
    parse_idx_images,
    parse_idx_labels,
    resolve_data_dir,
    standardize,
    standardize_pair,
    staircase,
    staircase_target,
    subsample,
    swiss_roll,
    write_idx,
)
from gramlab.errors import BadMagic, CountMismatch, DatasetMissing, TruncatedFile
from gramlab.rng import SplitMix64


# ---------------------------------------------------------------- generators


def test_swiss_roll_noiseless_on_spiral():
    ds = swiss_roll(200, noise=0.0, seed=1, scale=1.0)
    t = ds.meta["angle"]
    np.testing.assert_allclose(np.linalg.norm(ds.X, axis=0), t, rtol=1e-12)
    assert np.corrcoef(ds.Y.ravel(), t)[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_swiss_roll_reproducible():
    a, b = swiss_roll(50, seed=3), swiss_roll(50, seed=3)
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.X, swiss_roll(50, seed=4).X)


def test_staircase_plug_in():
    x = np.zeros((10, 2))
    x[:4, 0] = 1.0
    np.testing.assert_allclose(staircase_target(x), [4.0, 0.0])


def test_staircase_mean_near_zero():
    ds = staircase(4000, 10, seed=0)
    assert abs(ds.Y.mean()) <= 5 * ds.Y.std() / np.sqrt(4000)


def test_mod_add_small():
    tr, te = mod_add(3, 0.5, seed=0)
    assert tr.n + te.n == 9
    X = np.hstack([tr.X, te.X])
    labels = np.concatenate([tr.labels, te.labels])
    a, b = np.argmax(X[:3], axis=0), np.argmax(X[3:], axis=0)
    assert labels[(a == 2) & (b == 2)][0] == 1
    np.testing.assert_array_equal((a + b) % 3, labels)


def test_mod_add_uniform_classes():
    tr, te = mod_add(7, 0.5, seed=1)
    counts = np.bincount(np.concatenate([tr.labels, te.labels]), minlength=7)
    assert np.all(counts == 7)


# ---------------------------------------------------------------- IDX


def _images(n=5, seed=0):
    rng = SplitMix64(seed)
    return (rng.uniform((n, 4, 3)) * 256).astype(np.uint8), rng.integers(10, n).astype(np.uint8)


@pytest.mark.parametrize("suffix", ["", ".gz"])
def test_idx_roundtrip(tmp_path, suffix):
    imgs, labs = _images()
    ip, lp = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    write_idx(imgs, labs, ip, lp)
    ds = load_idx(ip, lp)
    assert ds.X.shape == (12, 5)
    np.testing.assert_allclose(ds.X, imgs.reshape(5, -1).T / 255.0)
    np.testing.assert_array_equal(ds.labels, labs)


def test_idx_standard_header():
    header = bytes.fromhex("00000803") + (60000).to_bytes(4, "big") + (28).to_bytes(4, "big") + (28).to_bytes(4, "big")
    with pytest.raises(TruncatedFile):
        parse_idx_images(header)
    raw = header + bytes(60000 * 28 * 28)
    assert parse_idx_images(raw).shape == (60000, 28, 28)


def test_idx_bad_magic():
    with pytest.raises(BadMagic):
        parse_idx_labels(bytes.fromhex("00000803") + bytes(8))


def test_idx_short_header():
    with pytest.raises(TruncatedFile):
        parse_idx_labels(b"\x00\x00")


def test_idx_count_mismatch(tmp_path):
    imgs, labs = _images(5)
    write_idx(imgs, labs[:4], tmp_path / "i", tmp_path / "l")
    with pytest.raises(CountMismatch):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_idx_missing(tmp_path):
    with pytest.raises(DatasetMissing):
        load_idx(tmp_path / "nope", tmp_path / "nope2")


def test_gz_fallback(tmp_path):
    imgs, labs = _images()
    write_idx(imgs, labs, tmp_path / "i.gz", tmp_path / "l.gz")
    assert load_idx(tmp_path / "i", tmp_path / "l").n == 5


# ---------------------------------------------------------------- CIFAR


def _cifar_records(n, classes, seed=0):
    rng = SplitMix64(seed)
    labels = rng.integers(classes, n).astype(np.uint8)
    pixels = (rng.uniform((n, 3072)) * 256).astype(np.uint8)
    if classes == 10:
        recs = np.hstack([labels[:, None], pixels])
    else:
        recs = np.hstack([(labels // 5)[:, None], labels[:, None], pixels])
    return recs.tobytes(), labels, pixels


def test_cifar10_records(tmp_path):
    raw, labels, pixels = _cifar_records(7, 10)
    (tmp_path / "b.bin").write_bytes(raw)
    ds = load_cifar_binary(tmp_path / "b.bin")
    assert ds.n == len(raw) // 3073 == 7
    np.testing.assert_array_equal(ds.labels, labels)
    np.testing.assert_allclose(ds.X[:, 2], pixels[2] / 255.0)


def test_cifar100_fine_label(tmp_path):
    raw, labels, _ = _cifar_records(4, 100, seed=1)
    (tmp_path / "t.bin").write_bytes(raw)
    np.testing.assert_array_equal(load_cifar_binary(tmp_path / "t.bin", classes=100).labels, labels)


def test_cifar_truncated(tmp_path):
    raw, _, _ = _cifar_records(3, 10)
    (tmp_path / "b.bin").write_bytes(raw[:-5])
    with pytest.raises(TruncatedFile):
        load_cifar_binary(tmp_path / "b.bin")


def test_cifar_bad_label(tmp_path):
    raw = bytearray(_cifar_records(2, 10)[0])
    raw[0] = 12
    (tmp_path / "b.bin").write_bytes(bytes(raw))
    with pytest.raises(CountMismatch):
        load_cifar_binary(tmp_path / "b.bin")


def test_cifar_directory_layout(tmp_path):
    base = tmp_path / "cifar-10-batches-bin"
    base.mkdir()
    for i in range(1, 6):
        (base / f"data_batch_{i}.bin").write_bytes(_cifar_records(3, 10, seed=i)[0])
    with gzip.open(base / "test_batch.bin.gz", "wb") as fh:
        fh.write(_cifar_records(2, 10, seed=9)[0])
    assert load_cifar(tmp_path).n == 15
    assert load_cifar(tmp_path, split="test").n == 2


def test_cifar_missing(tmp_path):
    with pytest.raises(DatasetMissing):
        load_cifar(tmp_path)


# ---------------------------------------------------------------- bundled MNIST subset


def test_bundled_mnist_subset():
    tr, te = load_mnist(split="train"), load_mnist(split="test")
    assert (tr.X.shape, te.X.shape) == ((784, 4000), (784, 1000))
    assert set(np.unique(tr.labels)) == set(range(10))
    assert 0.05 < tr.X.mean() < 0.3


def test_data_dir_resolution(tmp_path, monkeypatch):
    assert resolve_data_dir(tmp_path) == tmp_path
    monkeypatch.setenv("DATA_DIR", str(tmp_path / "env"))
    assert resolve_data_dir() == tmp_path / "env"
    monkeypatch.delenv("DATA_DIR")
    assert resolve_data_dir().name == "data"


# ---------------------------------------------------------------- transforms


def _labelled(n=200, C=4, seed=0):
    rng = SplitMix64(seed)
    labels = rng.integers(C, n)
    return Dataset(rng.normal((3, n)), np.eye(C)[labels], labels, {"classes": C, "centered": False})


def test_corrupt_labels_p0_unchanged():
    ds = _labelled()
    np.testing.assert_array_equal(corrupt_labels(ds, 0.0).labels, ds.labels)


def test_corrupt_labels_p1_chance_agreement():
    ds = _labelled(4000, 4)
    agree = np.mean(corrupt_labels(ds, 1.0, seed=2).labels == ds.labels)
    assert abs(agree - 0.25) <= 4 * np.sqrt(0.25 * 0.75 / 4000)


def test_corrupt_labels_deterministic():
    ds = _labelled()
    np.testing.assert_array_equal(corrupt_labels(ds, 0.5, 3).labels, corrupt_labels(ds, 0.5, 3).labels)
    with pytest.raises(ValueError):
        corrupt_labels(ds, 1.5)


def test_subsample():
    ds = _labelled(100)
    sub = subsample(ds, 30, seed=1)
    assert sub.n == 30 and sub.meta["subsample"] == {"n": 30, "seed": 1}
    cols = [int(np.flatnonzero(np.all(ds.X == sub.X[:, [i]], axis=0))[0]) for i in range(30)]
    assert cols == sorted(set(cols))
    assert subsample(ds, 500) is ds


def test_standardize_cases():
    X = SplitMix64(5).normal((4, 50)) * 3 + 2
    Z, stats = standardize(X)
    np.testing.assert_allclose(Z.mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(Z.std(axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(standardize(Z)[0], Z, atol=1e-10)
    np.testing.assert_allclose(stats.invert(Z), X, atol=1e-12)
    const = np.vstack([np.full(10, 7.0), np.arange(10.0)])
    assert np.all(standardize(const)[0][0] == 0)


def test_standardize_pair_uses_train_stats():
    tr, te = _labelled(100, seed=1), _labelled(50, seed=2)
    tr2, te2 = standardize_pair(tr, te)
    stats = fit_standardizer(tr.X)
    np.testing.assert_allclose(te2.X, stats.apply(te.X))
    assert tr2.meta["standardized"] and te2.meta["standardized"]
