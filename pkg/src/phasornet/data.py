"""Dataset ingestion: MNIST (IDX) and CIFAR-10 (binary), plus batching.

Both formats are read bit-exactly per their public layouts. Pixels are scaled
by 1/255 into [0, 1] with no mean-centering; labels stay integer.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptRecordError,
    MagicMismatchError,
    TruncatedFileError,
    ValidationError,
)

MNIST_IMAGE_MAGIC = 2051
MNIST_LABEL_MAGIC = 2049
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3*32*32 pixel bytes


@dataclass
class Dataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    name: str = ""
    split: str = ""

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValidationError(
                f"image/label count mismatch: {self.images.shape[0]} vs {self.labels.shape[0]}"
            )

    def __len__(self):
        return self.images.shape[0]

    @property
    def n_classes(self):
        return 10

    @property
    def input_shape(self):
        return self.images.shape[1:]


def _read_be32(f, path):
    data = f.read(4)
    if len(data) != 4:
        raise TruncatedFileError("file ended inside a header field",
                                 path=path, offset=f.tell() - len(data))
    return struct.unpack(">i", data)[0]


def load_mnist_idx(images_path, labels_path, name="mnist", split=""):
    """Read the big-endian IDX pair into a (N, 1, 28, 28) dataset."""
    with open(images_path, "rb") as f:
        magic = _read_be32(f, images_path)
        if magic != MNIST_IMAGE_MAGIC:
            raise MagicMismatchError(
                f"expected image magic {MNIST_IMAGE_MAGIC}, found {magic}",
                path=images_path, offset=0)
        count = _read_be32(f, images_path)
        rows = _read_be32(f, images_path)
        cols = _read_be32(f, images_path)
        payload = f.read(count * rows * cols)
        if len(payload) != count * rows * cols:
            raise TruncatedFileError(
                f"expected {count * rows * cols} pixel bytes, found {len(payload)}",
                path=images_path, offset=16)
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, 1, rows, cols)

    with open(labels_path, "rb") as f:
        magic = _read_be32(f, labels_path)
        if magic != MNIST_LABEL_MAGIC:
            raise MagicMismatchError(
                f"expected label magic {MNIST_LABEL_MAGIC}, found {magic}",
                path=labels_path, offset=0)
        n_labels = _read_be32(f, labels_path)
        payload = f.read(n_labels)
        if len(payload) != n_labels:
            raise TruncatedFileError(
                f"expected {n_labels} label bytes, found {len(payload)}",
                path=labels_path, offset=8)
    labels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)

    if n_labels != count:
        raise TruncatedFileError(
            f"image count {count} != label count {n_labels}", path=labels_path, offset=4)
    return Dataset(images.astype(np.float32) / 255.0, labels, name=name, split=split)


def load_cifar10_bin(batch_paths, name="cifar10", split=""):
    """Read CIFAR-10 binary batches (3073-byte records, R/G/B planes)."""
    all_images, all_labels = [], []
    for path in batch_paths:
        with open(path, "rb") as f:
            raw = f.read()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise TruncatedFileError(
                f"size {len(raw)} is not a positive multiple of {CIFAR_RECORD_BYTES}",
                path=path, offset=len(raw))
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels = records[:, 0]
        if labels.max(initial=0) > 9:
            bad = int(np.flatnonzero(labels > 9)[0])
            raise CorruptRecordError(
                f"label byte {labels[bad]} > 9 in record {bad}",
                path=path, offset=bad * CIFAR_RECORD_BYTES)
        all_labels.append(labels.astype(np.int64))
        all_images.append(records[:, 1:].reshape(-1, 3, 32, 32))
    images = np.concatenate(all_images)
    labels = np.concatenate(all_labels)
    return Dataset(images.astype(np.float32) / 255.0, labels, name=name, split=split)


class BatchIterator:
    """Deterministic per-epoch permutation; the final partial batch is kept.

    Epoch e uses the permutation seeded by (seed, e), so iteration order is
    reproducible and every index is visited exactly once per epoch.
    """

    def __init__(self, dataset, batch_size, seed=0):
        if batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {batch_size}")
        self.dataset = dataset
        self.batch_size = int(batch_size)
        self.seed = int(seed)
        self.epoch = 0

    def epoch_batches(self):
        """Yield (images, labels) batches for the current epoch, then bump it."""
        n = len(self.dataset)
        rng = np.random.default_rng((self.seed, self.epoch))
        order = rng.permutation(n)
        for start in range(0, n, self.batch_size):
            idx = order[start:start + self.batch_size]
            yield self.dataset.images[idx], self.dataset.labels[idx]
        self.epoch += 1


def batches(dataset, size, seed=0):
    return BatchIterator(dataset, size, seed)
