"""Dataset ingestion and synthesis.

Covers IDX-format image/label files (gzipped or raw), threshold
binarization into the ternary input alphabet, deterministic train/validation
splitting, and two synthetic generators: Gaussian blob classes for fast
fixtures and a 28x28 glyph renderer that produces MNIST-shaped IDX files
for desk-scale end-to-end runs.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from ternnet.linalg import Rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Base error for malformed IDX files."""


class IdxBadMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


class IdxLabelError(IdxError):
    pass


@dataclass
class RawImageDataset:
    """Grayscale images as loaded from IDX files, pixels 0..255."""

    images: np.ndarray  # uint8, shape (n, rows*cols)
    labels: np.ndarray  # int32, shape (n,)
    rows: int
    cols: int

    def __len__(self):
        return len(self.labels)


@dataclass
class Dataset:
    """Ternary-input classification dataset.

    Every input element is in {-1, 0, +1} and every label is a class index
    below num_classes; both are checked at construction time.
    """

    inputs: np.ndarray  # int8, shape (n, input_dim)
    labels: np.ndarray  # int32, shape (n,)
    num_classes: int

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.int8)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D array")
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels disagree on sample count")
        if self.inputs.size and not np.isin(self.inputs, (-1, 0, 1)).all():
            raise ValueError("inputs must take values in {-1, 0, 1}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return len(self.labels)

    def take(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes)


def _open_maybe_gz(path):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise IdxTruncatedError(f"truncated IDX file while reading {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def load_mnist_idx(images_path, labels_path) -> RawImageDataset:
    """Load an MNIST-style IDX image/label file pair.

    Validates the magic numbers (0x803 images, 0x801 labels), the byte
    counts, the agreement of both sample counts, and the 0..9 label domain.
    """
    with _open_maybe_gz(images_path) as f:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, "image header"))
        if magic != IMAGES_MAGIC:
            raise IdxBadMagicError(f"bad image magic 0x{magic:08x} in {images_path}")
        payload = _read_exact(f, n * rows * cols, "image data")
        if f.read(1):
            raise IdxError(f"trailing bytes after image data in {images_path}")
        images = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows * cols)

    with _open_maybe_gz(labels_path) as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, "label header"))
        if magic != LABELS_MAGIC:
            raise IdxBadMagicError(f"bad label magic 0x{magic:08x} in {labels_path}")
        payload = _read_exact(f, n_labels, "label data")
        if f.read(1):
            raise IdxError(f"trailing bytes after label data in {labels_path}")
        labels = np.frombuffer(payload, dtype=np.uint8)

    if n != n_labels:
        raise IdxCountMismatchError(f"{n} images but {n_labels} labels")
    if labels.size and labels.max() > 9:
        raise IdxLabelError(f"label {labels.max()} out of the 0..9 digit range")
    return RawImageDataset(images=images.copy(), labels=labels.astype(np.int32), rows=rows, cols=cols)


def write_idx(raw: RawImageDataset, images_path, labels_path) -> None:
    """Write a RawImageDataset as a standard IDX image/label file pair."""
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, len(raw), raw.rows, raw.cols))
        f.write(np.ascontiguousarray(raw.images, dtype=np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, len(raw)))
        f.write(np.ascontiguousarray(raw.labels, dtype=np.uint8).tobytes())


def binarize_pixels(pixels, threshold: float) -> np.ndarray:
    """Map pixel values to {0, 1}: strictly greater than threshold fires 1.

    The threshold is in the units of the data itself, so the map is
    idempotent once the data is binary (any threshold in (0, 1) then acts
    as the identity).
    """
    return (np.asarray(pixels) > threshold).astype(np.int8)


def binarize_threshold(raw: RawImageDataset, threshold: float = 127.0, num_classes: int = 10) -> Dataset:
    """Binarize a grayscale dataset into a {0,1}-coded ternary Dataset."""
    if not 0.0 <= threshold <= 255.0:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    return Dataset(binarize_pixels(raw.images, threshold), raw.labels, num_classes)


def split(ds: Dataset, train: int, validation: int) -> tuple[Dataset, Dataset]:
    """Order-preserving split: first `train` samples, last `validation` samples."""
    if train < 0 or validation < 0:
        raise ValueError("split sizes must be non-negative")
    if train + validation > len(ds):
        raise ValueError(f"requested {train}+{validation} samples from a dataset of {len(ds)}")
    head = ds.take(slice(0, train))
    tail = ds.take(slice(len(ds) - validation, len(ds)))
    return head, tail


def synth_blobs(rng: Rng, n: int, dim: int, classes: int) -> Dataset:
    """Ternarized Gaussian blobs, one centroid per class.

    Centroids are ternary patterns scaled to 6 sigma so the classes stay
    separable after the sign-band ternarization of the noisy samples.
    """
    if n < 1 or dim < 1 or classes < 1:
        raise ValueError("n, dim and classes must all be >= 1")
    scale = 6.0
    centroids = np.zeros((classes, dim))
    seen = set()
    for c in range(classes):
        for _ in range(64):
            pattern = rng.integers(-1, 2, size=dim)
            key = pattern.tobytes()
            if key not in seen or len(seen) >= 3**dim:
                seen.add(key)
                break
        centroids[c] = pattern * scale
    labels = rng.integers(0, classes, size=n).astype(np.int32)
    points = centroids[labels] + rng.normal(0.0, 1.0, size=(n, dim))
    inputs = np.zeros((n, dim), dtype=np.int8)
    inputs[points > scale / 2] = 1
    inputs[points < -scale / 2] = -1
    return Dataset(inputs, labels, classes)


# ---------------------------------------------------------------------------
# Synthetic 28x28 digit glyphs.
#
# Desk-scale stand-in for handwritten digits: ten stroke-based glyph classes
# rendered with random rotation, scale, translation, per-point wobble, stroke
# width and pixel noise, then written through the same IDX code path as the
# real files.  Same shape (784 inputs, 10 classes), tunable difficulty.
# ---------------------------------------------------------------------------

def _circle(cx, cy, rx, ry, n=16):
    t = np.linspace(0.0, 2.0 * np.pi, n + 1)
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


_GLYPHS = {
    0: [_circle(0.5, 0.5, 0.26, 0.37)],
    1: [np.array([(0.36, 0.26), (0.55, 0.12), (0.55, 0.88)])],
    2: [
        np.array(
            [
                (0.28, 0.34),
                (0.33, 0.18),
                (0.5, 0.12),
                (0.67, 0.18),
                (0.72, 0.34),
                (0.6, 0.52),
                (0.4, 0.68),
                (0.28, 0.88),
                (0.74, 0.88),
            ]
        )
    ],
    3: [
        np.array([(0.3, 0.18), (0.5, 0.11), (0.68, 0.2), (0.69, 0.33), (0.52, 0.46), (0.44, 0.48)]),
        np.array([(0.44, 0.48), (0.62, 0.5), (0.72, 0.63), (0.67, 0.79), (0.48, 0.89), (0.3, 0.8)]),
    ],
    4: [
        np.array([(0.58, 0.1), (0.28, 0.6), (0.78, 0.6)]),
        np.array([(0.62, 0.36), (0.62, 0.9)]),
    ],
    5: [
        np.array(
            [
                (0.7, 0.12),
                (0.33, 0.12),
                (0.3, 0.45),
                (0.55, 0.42),
                (0.7, 0.53),
                (0.71, 0.69),
                (0.58, 0.85),
                (0.34, 0.86),
                (0.28, 0.76),
            ]
        )
    ],
    6: [
        np.array(
            [
                (0.62, 0.1),
                (0.43, 0.25),
                (0.31, 0.5),
                (0.3, 0.7),
                (0.42, 0.87),
                (0.61, 0.86),
                (0.7, 0.71),
                (0.64, 0.56),
                (0.47, 0.51),
                (0.32, 0.6),
            ]
        )
    ],
    7: [np.array([(0.28, 0.12), (0.73, 0.12), (0.44, 0.88)])],
    8: [_circle(0.5, 0.3, 0.17, 0.17), _circle(0.5, 0.66, 0.21, 0.21)],
    9: [
        _circle(0.52, 0.32, 0.18, 0.18),
        np.array([(0.7, 0.34), (0.68, 0.6), (0.57, 0.88)]),
    ],
}


def _segment_distances(px, py, a, b):
    # Distance from every pixel center to segment a-b.
    ab = b - a
    denom = float(ab @ ab)
    apx = px - a[0]
    apy = py - a[1]
    if denom < 1e-12:
        return np.hypot(apx, apy)
    t = np.clip((apx * ab[0] + apy * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(apx - t * ab[0], apy - t * ab[1])


def synth_digits(rng: Rng, n: int, side: int = 28) -> RawImageDataset:
    """Render n labeled glyph images with per-sample jitter, grayscale uint8."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cols, rows = np.meshgrid(np.arange(side) + 0.5, np.arange(side) + 0.5)
    px = cols.ravel()
    py = rows.ravel()
    box = side - 6.0
    labels = rng.integers(0, 10, size=n).astype(np.int32)
    images = np.empty((n, side * side), dtype=np.uint8)
    for i in range(n):
        theta = float(np.clip(rng.normal(0.0, 0.16), -0.38, 0.38))
        scale = float(rng.uniform(0.82, 1.1)) * box
        shift = rng.uniform(-2.2, 2.2, size=2) + 3.0
        width = float(rng.uniform(0.75, 1.5))
        peak = float(rng.uniform(0.72, 1.0))
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        field = np.zeros(side * side)
        for stroke in _GLYPHS[int(labels[i])]:
            pts = (stroke - 0.5) @ rot.T * scale + 0.5 * box + shift
            pts = pts + rng.normal(0.0, 0.55, size=pts.shape)
            for a, b in zip(pts[:-1], pts[1:]):
                d = _segment_distances(px, py, a, b)
                np.maximum(field, np.exp(-(d * d) / (2.0 * width * width)), out=field)
        img = 255.0 * peak * field + rng.uniform(0.0, 28.0, size=side * side)
        images[i] = np.clip(img, 0.0, 255.0).astype(np.uint8)
    return RawImageDataset(images=images, labels=labels, rows=side, cols=side)


def synth_digits_idx(seed: int, n_train: int, n_test: int, out_dir) -> dict:
    """Generate a train/test glyph corpus and write it as four IDX files.

    Returns the file paths keyed like the conventional MNIST file names.
    Regenerating with the same seed yields byte-identical files.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    rng = Rng(seed)
    rng_train, rng_test = rng.split(2)
    paths = {
        "train_images": os.path.join(out_dir, "train-images-idx3-ubyte"),
        "train_labels": os.path.join(out_dir, "train-labels-idx1-ubyte"),
        "test_images": os.path.join(out_dir, "t10k-images-idx3-ubyte"),
        "test_labels": os.path.join(out_dir, "t10k-labels-idx1-ubyte"),
    }
    write_idx(synth_digits(rng_train, n_train), paths["train_images"], paths["train_labels"])
    write_idx(synth_digits(rng_test, n_test), paths["test_images"], paths["test_labels"])
    return paths
