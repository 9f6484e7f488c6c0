import gzip
import struct

import numpy as np
import pytest

from ternnet.data import (
    Dataset,
    IdxBadMagicError,
    IdxCountMismatchError,
    IdxLabelError,
    IdxTruncatedError,
    RawImageDataset,
    binarize_pixels,
    binarize_threshold,
    load_mnist_idx,
    split,
    synth_blobs,
    synth_digits,
    synth_digits_idx,
    write_idx,
)
from ternnet.linalg import Rng
from ternnet.runtime import load_dataset, save_dataset


def write_pair(tmp_path, images, labels, rows=28, cols=28):
    raw = RawImageDataset(images=images.astype(np.uint8), labels=labels.astype(np.int32), rows=rows, cols=cols)
    ip, lp = tmp_path / "imgs", tmp_path / "lbls"
    write_idx(raw, ip, lp)
    return ip, lp


def test_idx_round_trip_test_set_shape(tmp_path):
    g = np.random.default_rng(0)
    images = g.integers(0, 256, size=(10_000, 784)).astype(np.uint8)
    labels = g.integers(0, 10, size=10_000)
    ip, lp = write_pair(tmp_path, images, labels)
    raw = load_mnist_idx(ip, lp)
    assert len(raw) == 10_000
    assert raw.images.shape == (10_000, 784)
    assert np.array_equal(raw.images, images)
    assert np.array_equal(raw.labels, labels)


def test_idx_gzip_supported(tmp_path):
    g = np.random.default_rng(1)
    images = g.integers(0, 256, size=(5, 784)).astype(np.uint8)
    labels = g.integers(0, 10, size=5)
    ip, lp = write_pair(tmp_path, images, labels)
    for src in (ip, lp):
        with open(src, "rb") as f, gzip.open(str(src) + ".gz", "wb") as z:
            z.write(f.read())
    raw = load_mnist_idx(str(ip) + ".gz", str(lp) + ".gz")
    assert np.array_equal(raw.images, images)


def test_idx_truncated_file_rejected(tmp_path):
    g = np.random.default_rng(2)
    ip, lp = write_pair(tmp_path, g.integers(0, 256, size=(4, 784)), g.integers(0, 10, size=4))
    blob = ip.read_bytes()
    ip.write_bytes(blob[:-100])
    with pytest.raises(IdxTruncatedError):
        load_mnist_idx(ip, lp)


def test_idx_bad_magic_rejected(tmp_path):
    g = np.random.default_rng(3)
    ip, lp = write_pair(tmp_path, g.integers(0, 256, size=(4, 784)), g.integers(0, 10, size=4))
    blob = bytearray(ip.read_bytes())
    blob[3] = 0x99
    ip.write_bytes(bytes(blob))
    with pytest.raises(IdxBadMagicError):
        load_mnist_idx(ip, lp)


def test_idx_count_mismatch_rejected(tmp_path):
    g = np.random.default_rng(4)
    ip, _ = write_pair(tmp_path, g.integers(0, 256, size=(4, 784)), g.integers(0, 10, size=4))
    lp = tmp_path / "short-labels"
    with open(lp, "wb") as f:
        f.write(struct.pack(">II", 0x801, 3))
        f.write(bytes([1, 2, 3]))
    with pytest.raises(IdxCountMismatchError):
        load_mnist_idx(ip, lp)


def test_idx_label_domain_rejected(tmp_path):
    g = np.random.default_rng(5)
    ip, lp = write_pair(tmp_path, g.integers(0, 256, size=(3, 784)), np.array([1, 12, 3]))
    with pytest.raises(IdxLabelError):
        load_mnist_idx(ip, lp)


def test_binarize_all_zero_and_all_255():
    raw = RawImageDataset(
        images=np.vstack([np.zeros(784), np.full(784, 255)]).astype(np.uint8),
        labels=np.array([0, 1], dtype=np.int32),
        rows=28,
        cols=28,
    )
    ds = binarize_threshold(raw, 127)
    assert not ds.inputs[0].any()
    assert ds.inputs[1].all()


def test_binarize_fraction_matches_counting_oracle():
    g = np.random.default_rng(6)
    images = g.integers(0, 256, size=(200, 784)).astype(np.uint8)
    raw = RawImageDataset(images=images, labels=np.zeros(200, dtype=np.int32), rows=28, cols=28)
    ds = binarize_threshold(raw, 127)
    # One-pass counting oracle.
    count = 0
    for row in images:
        for pix in row:
            if pix > 127:
                count += 1
    assert ds.inputs.sum() == count


def test_binarize_idempotent_on_binary_data():
    g = np.random.default_rng(7)
    once = binarize_pixels(g.integers(0, 256, size=(50, 32)), 127)
    assert np.array_equal(binarize_pixels(once, 0.5), once)


def test_binarize_threshold_out_of_range():
    raw = RawImageDataset(images=np.zeros((1, 4), np.uint8), labels=np.zeros(1, np.int32), rows=2, cols=2)
    with pytest.raises(ValueError):
        binarize_threshold(raw, 300)


def make_dataset(n, dim=1, classes=10):
    inputs = np.zeros((n, dim), dtype=np.int8)
    labels = (np.arange(n) % classes).astype(np.int32)
    return Dataset(inputs, labels, classes)


def test_split_last_samples_are_validation():
    ds = make_dataset(60_000)
    train, val = split(ds, 50_000, 10_000)
    assert len(train) == 50_000 and len(val) == 10_000
    assert np.array_equal(val.labels, ds.labels[50_000:])


def test_split_full_train_empty_validation():
    ds = make_dataset(100)
    train, val = split(ds, len(ds), 0)
    assert len(train) == 100 and len(val) == 0


def test_split_overflow_rejected():
    with pytest.raises(ValueError):
        split(make_dataset(100), 90, 20)


def nearest_centroid_accuracy(ds):
    # Independent oracle: class means of the final ternary inputs.
    x = ds.inputs.astype(np.float64)
    centroids = np.stack([x[ds.labels == c].mean(axis=0) for c in range(ds.num_classes)])
    d = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(d.argmin(axis=1) == ds.labels))


def test_blobs_nearest_centroid_separable():
    ds = synth_blobs(Rng(11), 500, 8, 2)
    assert nearest_centroid_accuracy(ds) >= 0.95


def test_blobs_single_sample_valid():
    ds = synth_blobs(Rng(12), 1, 4, 3)
    assert len(ds) == 1
    assert ds.inputs.shape == (1, 4)


def test_blobs_seed_reproducible():
    a = synth_blobs(Rng(13), 64, 6, 3)
    b = synth_blobs(Rng(13), 64, 6, 3)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_dataset_invariants_enforced():
    with pytest.raises(ValueError):
        Dataset(np.array([[2]], dtype=np.int8), np.array([0]), 1)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 3), np.int8), np.array([0, 5]), 3)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 3), np.int8), np.array([0]), 3)


def test_dataset_container_round_trip(tmp_path):
    ds = synth_blobs(Rng(14), 80, 5, 4)
    path = tmp_path / "blobs.tnn"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.labels, ds.labels)
    assert back.num_classes == ds.num_classes


def test_synth_digits_deterministic_and_idx_backed(tmp_path):
    a = synth_digits(Rng(21), 24)
    b = synth_digits(Rng(21), 24)
    assert np.array_equal(a.images, b.images)
    paths = synth_digits_idx(3, 40, 16, tmp_path / "digits")
    train = load_mnist_idx(paths["train_images"], paths["train_labels"])
    test = load_mnist_idx(paths["test_images"], paths["test_labels"])
    assert len(train) == 40 and len(test) == 16
    assert train.images.shape == (40, 784)
    # Regenerating with the same seed is byte-identical.
    first = open(paths["train_images"], "rb").read()
    synth_digits_idx(3, 40, 16, tmp_path / "digits2")
    second = open(tmp_path / "digits2" / "train-images-idx3-ubyte", "rb").read()
    assert first == second
