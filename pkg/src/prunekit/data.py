"""Dataset loading, standardization, and synthesis.

Supports the IDX image/label format (optionally gzip-compressed, detected by
the 0x1f 0x8b magic), the CIFAR-10 binary batch format, and a synthetic
Gaussian-blob fixture for fast tests. Inputs are flattened float64 vectors,
standardized with fixed constants so loading is reproducible byte for byte.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_MEAN = 0.1307
MNIST_STD = 0.3081

CIFAR10_MEAN = (0.4914, 0.4822, 0.4465)
CIFAR10_STD = (0.2470, 0.2435, 0.2616)
_CIFAR_RECORD = 3073  # 1 label byte + 3 * 1024 pixel bytes

# Fixed salt for the per-class mean directions of the synthetic fixture, so
# the class geometry does not depend on the sampling seed.
_DIRECTION_SALT = 0x5EED


class DatasetFormatError(ValueError):
    """A dataset file does not match its declared binary format."""


@dataclass(frozen=True)
class Example:
    example_id: int
    x: np.ndarray
    y: int


@dataclass
class Dataset:
    """Ordered labeled examples with a split tag.

    xs is (n, input_dim) float64 in on-disk order; ids[i] is the stable
    example id (file position at load time, preserved by pruning). The
    standardization constants are kept so raw pixel values can be recovered.
    """

    xs: np.ndarray
    ys: np.ndarray
    ids: np.ndarray
    num_classes: int
    split: str
    standardize_mean: np.ndarray | None = None
    standardize_std: np.ndarray | None = None

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.xs.shape[1]

    def example(self, i: int) -> Example:
        return Example(int(self.ids[i]), self.xs[i], int(self.ys[i]))

    def take(self, positions) -> "Dataset":
        """Sub-dataset at the given positions, keeping order and example ids."""
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            self.xs[positions].copy(),
            self.ys[positions].copy(),
            self.ids[positions].copy(),
            self.num_classes,
            self.split,
            self.standardize_mean,
            self.standardize_std,
        )

    def destandardized(self) -> np.ndarray:
        """Inputs with the standardization undone (raw [0,1] pixel scale)."""
        if self.standardize_mean is None:
            return self.xs.copy()
        return self.xs * self.standardize_std + self.standardize_mean


def _read_file(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _parse_idx(data: bytes, expected_magic: int, path) -> tuple[np.ndarray, tuple[int, ...]]:
    if len(data) < 4:
        raise DatasetFormatError(f"{path}: truncated file (no magic)")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise DatasetFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    n_dims = magic & 0xFF
    header_end = 4 + 4 * n_dims
    if len(data) < header_end:
        raise DatasetFormatError(f"{path}: truncated file (incomplete dimension header)")
    dims = struct.unpack(f">{n_dims}I", data[4:header_end])
    count = int(np.prod(dims))
    if len(data) - header_end < count:
        raise DatasetFormatError(f"{path}: truncated file (payload shorter than header claims)")
    payload = np.frombuffer(data, dtype=np.uint8, count=count, offset=header_end)
    return payload, dims


def load_mnist(images_path, labels_path, split: str = "train") -> Dataset:
    """Load an IDX image/label file pair into a standardized Dataset.

    Pixels are scaled to [0,1] and standardized with the fixed constants
    (mean 0.1307, std 0.3081). Example ids follow file order.
    """
    images, image_dims = _parse_idx(_read_file(images_path), IDX_IMAGES_MAGIC, images_path)
    labels, label_dims = _parse_idx(_read_file(labels_path), IDX_LABELS_MAGIC, labels_path)
    n, rows, cols = image_dims
    if label_dims[0] != n:
        raise DatasetFormatError(
            f"length mismatch: {n} images in {images_path} but {label_dims[0]} labels in {labels_path}"
        )
    ys = labels.astype(np.int64)
    if ys.size and ys.max() > 9:
        raise DatasetFormatError(f"{labels_path}: label out of range (max {ys.max()})")
    xs = images.reshape(n, rows * cols).astype(np.float64) / 255.0
    xs = (xs - MNIST_MEAN) / MNIST_STD
    dim = rows * cols
    return Dataset(
        np.ascontiguousarray(xs),
        ys,
        np.arange(n, dtype=np.int64),
        num_classes=10,
        split=split,
        standardize_mean=np.full(dim, MNIST_MEAN),
        standardize_std=np.full(dim, MNIST_STD),
    )


def load_cifar10(batch_paths, split: str = "train") -> Dataset:
    """Load CIFAR-10 binary batches (1 label byte + 3072 pixel bytes per record).

    Per-channel standardization with fixed constants; example ids are
    assigned in concatenated file order.
    """
    chunks = []
    labels = []
    for path in batch_paths:
        data = _read_file(path)
        if len(data) == 0 or len(data) % _CIFAR_RECORD != 0:
            raise DatasetFormatError(
                f"{path}: truncated (length {len(data)} is not a multiple of {_CIFAR_RECORD})"
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
        batch_labels = records[:, 0].astype(np.int64)
        if batch_labels.max() > 9:
            raise DatasetFormatError(
                f"{path}: label out of range (byte {int(batch_labels.max())})"
            )
        labels.append(batch_labels)
        chunks.append(records[:, 1:])
    pixels = np.concatenate(chunks, axis=0).astype(np.float64) / 255.0
    mean = np.repeat(np.asarray(CIFAR10_MEAN), 1024)
    std = np.repeat(np.asarray(CIFAR10_STD), 1024)
    xs = (pixels - mean) / std
    ys = np.concatenate(labels)
    n = xs.shape[0]
    return Dataset(
        np.ascontiguousarray(xs),
        ys,
        np.arange(n, dtype=np.int64),
        num_classes=10,
        split=split,
        standardize_mean=mean,
        standardize_std=std,
    )


def class_direction(c: int, dim: int) -> np.ndarray:
    """Deterministic unit-norm mean direction for synthetic class c."""
    v = np.random.default_rng([_DIRECTION_SALT, c, dim]).standard_normal(dim)
    return v / np.linalg.norm(v)


def synthetic_gaussian(
    num_classes: int, dim: int, per_class: int, seed: int, split: str = "train"
) -> Dataset:
    """Gaussian blobs: class c is Normal(3 * u_c, I) with u_c a fixed unit direction.

    Examples are laid out class-major ([0]*per_class + [1]*per_class + ...),
    deterministically for a fixed seed.
    """
    if num_classes < 1 or dim < 1 or per_class < 1:
        raise ValueError("num_classes, dim and per_class must all be >= 1")
    rng = np.random.default_rng([seed, num_classes, dim, per_class])
    blocks = []
    for c in range(num_classes):
        mu = 3.0 * class_direction(c, dim)
        blocks.append(mu + rng.standard_normal((per_class, dim)))
    xs = np.ascontiguousarray(np.concatenate(blocks, axis=0))
    ys = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    n = num_classes * per_class
    return Dataset(xs, ys, np.arange(n, dtype=np.int64), num_classes=num_classes, split=split)


def input_norms(ds: Dataset, normalized: bool = True) -> np.ndarray:
    """Per-example L2 norms, in dataset order.

    By default norms are taken over the standardized inputs the model sees;
    normalized=False uses the de-standardized (raw) values instead.
    """
    xs = ds.xs if normalized else ds.destandardized()
    return np.linalg.norm(xs, axis=1)
