import gzip
import math
import struct

import numpy as np
import pytest

from conftest import require_mnist
from prunekit.data import (
    CIFAR10_MEAN,
    CIFAR10_STD,
    MNIST_MEAN,
    MNIST_STD,
    Dataset,
    DatasetFormatError,
    input_norms,
    load_cifar10,
    load_mnist,
    synthetic_gaussian,
)


def idx_images_bytes(images: np.ndarray) -> bytes:
    n, rows, cols = images.shape
    return struct.pack(">IIII", 0x00000803, n, rows, cols) + images.astype(np.uint8).tobytes()


def idx_labels_bytes(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 0x00000801, labels.size) + labels.tobytes()


def write_mnist_pair(tmp_path, images, labels, gz=False):
    img_bytes = idx_images_bytes(images)
    lbl_bytes = idx_labels_bytes(labels)
    if gz:
        img_bytes = gzip.compress(img_bytes)
        lbl_bytes = gzip.compress(lbl_bytes)
    img_path = tmp_path / ("img.idx" + (".gz" if gz else ""))
    lbl_path = tmp_path / ("lbl.idx" + (".gz" if gz else ""))
    img_path.write_bytes(img_bytes)
    lbl_path.write_bytes(lbl_bytes)
    return img_path, lbl_path


def cifar_batch_bytes(labels, pixels) -> bytes:
    out = bytearray()
    for label, px in zip(labels, pixels):
        out.append(label)
        out.extend(np.asarray(px, dtype=np.uint8).tobytes())
    return bytes(out)


class TestLoadMnist:
    def test_small_file_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(3, 2, 2), dtype=np.uint8)
        labels = [1, 0, 9]
        ds = load_mnist(*write_mnist_pair(tmp_path, images, labels))
        assert len(ds) == 3
        assert ds.input_dim == 4
        assert ds.num_classes == 10
        assert ds.split == "train"
        assert np.array_equal(ds.ids, [0, 1, 2])
        assert np.array_equal(ds.ys, labels)
        expected = (images.reshape(3, 4) / 255.0 - MNIST_MEAN) / MNIST_STD
        assert np.allclose(ds.xs, expected, rtol=0, atol=1e-15)

    def test_gzip_detected_by_magic(self, tmp_path):
        images = np.full((2, 2, 2), 128, dtype=np.uint8)
        plain = load_mnist(*write_mnist_pair(tmp_path, images, [3, 4]))
        gzipped = load_mnist(*write_mnist_pair(tmp_path, images, [3, 4], gz=True))
        assert np.array_equal(plain.xs, gzipped.xs)
        assert np.array_equal(plain.ys, gzipped.ys)

    def test_all_zero_image_standardization(self, tmp_path):
        ds = load_mnist(*write_mnist_pair(tmp_path, np.zeros((1, 2, 2), np.uint8), [0]))
        expected = -MNIST_MEAN / MNIST_STD
        assert np.allclose(ds.xs, expected, rtol=0, atol=1e-15)
        assert expected == pytest.approx(-0.42421, abs=1e-5)

    def test_labels_file_with_image_magic(self, tmp_path):
        images = np.zeros((1, 2, 2), np.uint8)
        img_path, _ = write_mnist_pair(tmp_path, images, [0])
        bad = tmp_path / "bad.idx"
        bad.write_bytes(idx_images_bytes(images))  # wrong magic for a labels file
        with pytest.raises(DatasetFormatError, match="bad magic"):
            load_mnist(img_path, bad)

    def test_images_file_bad_magic(self, tmp_path):
        _, lbl_path = write_mnist_pair(tmp_path, np.zeros((1, 2, 2), np.uint8), [0])
        bad = tmp_path / "bad_images.idx"
        bad.write_bytes(idx_labels_bytes([0]))
        with pytest.raises(DatasetFormatError, match="bad magic"):
            load_mnist(bad, lbl_path)

    def test_count_mismatch(self, tmp_path):
        img_path, _ = write_mnist_pair(tmp_path, np.zeros((2, 2, 2), np.uint8), [0, 1])
        lbl3 = tmp_path / "three.idx"
        lbl3.write_bytes(idx_labels_bytes([0, 1, 2]))
        with pytest.raises(DatasetFormatError, match="length mismatch"):
            load_mnist(img_path, lbl3)

    def test_truncated_payload(self, tmp_path):
        blob = idx_images_bytes(np.zeros((2, 2, 2), np.uint8))[:-3]
        img_path = tmp_path / "short.idx"
        img_path.write_bytes(blob)
        _, lbl_path = write_mnist_pair(tmp_path, np.zeros((2, 2, 2), np.uint8), [0, 1])
        with pytest.raises(DatasetFormatError, match="truncated"):
            load_mnist(img_path, lbl_path)

    def test_label_out_of_range(self, tmp_path):
        img_path, _ = write_mnist_pair(tmp_path, np.zeros((1, 2, 2), np.uint8), [0])
        lbl_path = tmp_path / "big.idx"
        lbl_path.write_bytes(idx_labels_bytes([12]))
        with pytest.raises(DatasetFormatError, match="label out of range"):
            load_mnist(img_path, lbl_path)

    def test_loader_determinism(self, tmp_path):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(4, 3, 3), dtype=np.uint8)
        paths = write_mnist_pair(tmp_path, images, [1, 2, 3, 4])
        a = load_mnist(*paths)
        b = load_mnist(*paths)
        assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)

    def test_real_mnist_counts(self):
        files = require_mnist()
        ds = load_mnist(files["train-images-idx3-ubyte"], files["train-labels-idx1-ubyte"])
        assert len(ds) == 60000
        assert ds.input_dim == 784
        assert ds.num_classes == 10


class TestLoadCifar10:
    def test_two_batches(self, tmp_path):
        rng = np.random.default_rng(1)
        px = rng.integers(0, 256, size=(3, 3072), dtype=np.uint8)
        p1 = tmp_path / "b1.bin"
        p2 = tmp_path / "b2.bin"
        p1.write_bytes(cifar_batch_bytes([0, 5], px[:2]))
        p2.write_bytes(cifar_batch_bytes([9], px[2:]))
        ds = load_cifar10([p1, p2])
        assert len(ds) == 3
        assert ds.input_dim == 3072
        assert np.array_equal(ds.ids, [0, 1, 2])
        assert np.array_equal(ds.ys, [0, 5, 9])
        # independent per-channel standardization of one pixel from each channel
        for ch in range(3):
            idx = ch * 1024 + 7
            expected = (px[1, idx] / 255.0 - CIFAR10_MEAN[ch]) / CIFAR10_STD[ch]
            assert ds.xs[1, idx] == pytest.approx(expected, rel=1e-14)

    def test_truncated_record(self, tmp_path):
        p = tmp_path / "b.bin"
        p.write_bytes(cifar_batch_bytes([1], np.zeros((1, 3072), np.uint8))[:-10])
        with pytest.raises(DatasetFormatError, match="truncated"):
            load_cifar10([p])

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "b.bin"
        p.write_bytes(cifar_batch_bytes([12], np.zeros((1, 3072), np.uint8)))
        with pytest.raises(DatasetFormatError, match="label out of range"):
            load_cifar10([p])


class TestSyntheticGaussian:
    def test_deterministic(self):
        a = synthetic_gaussian(2, 2, 5, 7)
        b = synthetic_gaussian(2, 2, 5, 7)
        assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)

    def test_class_major_layout(self):
        ds = synthetic_gaussian(2, 3, 5, 0)
        assert len(ds) == 10
        assert np.array_equal(ds.ys, [0] * 5 + [1] * 5)
        assert np.array_equal(ds.ids, np.arange(10))

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            synthetic_gaussian(0, 2, 5, 0)

    def test_example_accessor(self):
        ds = synthetic_gaussian(2, 3, 2, 0)
        ex = ds.example(3)
        assert ex.example_id == 3
        assert ex.y == 1
        assert np.array_equal(ex.x, ds.xs[3])

    def test_fixture_is_separable(self):
        # Pilot-established property: a small MLP learns the fixture quickly.
        from prunekit.nn import ModelSpec
        from prunekit.train import TrainConfig, evaluate, train

        ds = synthetic_gaussian(10, 20, 100, 1)
        test = synthetic_gaussian(10, 20, 20, 2, split="test")
        cfg = TrainConfig(epochs=5, batch_size=64, learning_rate=0.1, momentum=0.9, seed=0)
        result = train(ModelSpec((20, 32, 10)), ds, test, cfg, None)
        assert evaluate(result.final_params, ds) > 0.9


class TestInputNorms:
    def _plain_dataset(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        return Dataset(xs, np.zeros(len(xs), np.int64), np.arange(len(xs)), 2, "train")

    def test_zero_vector(self):
        assert input_norms(self._plain_dataset([[0.0, 0.0]]))[0] == 0.0

    def test_three_four_five(self):
        assert input_norms(self._plain_dataset([[3.0, 4.0]]))[0] == 5.0

    def test_independent_recomputation(self, tmp_path):
        rng = np.random.default_rng(9)
        images = rng.integers(0, 256, size=(2, 3, 3), dtype=np.uint8)
        ds = load_mnist(*write_mnist_pair(tmp_path, images, [0, 1]))
        norms = input_norms(ds)
        for i in range(2):
            expected = math.sqrt(math.fsum(float(v) * float(v) for v in ds.xs[i]))
            assert norms[i] == pytest.approx(expected, rel=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        xs = rng.standard_normal((6, 3))
        ds = self._plain_dataset(xs)
        perm = rng.permutation(6)
        permuted = ds.take(perm)
        assert np.allclose(input_norms(permuted), input_norms(ds)[perm], rtol=0, atol=0)

    def test_raw_flag_uses_destandardized_values(self, tmp_path):
        images = np.full((1, 2, 2), 51, dtype=np.uint8)  # raw pixel 0.2
        ds = load_mnist(*write_mnist_pair(tmp_path, images, [0]))
        raw = input_norms(ds, normalized=False)
        assert raw[0] == pytest.approx(math.sqrt(4 * 0.2**2), rel=1e-12)
        assert input_norms(ds)[0] != raw[0]

    def test_destandardize_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        images = rng.integers(0, 256, size=(3, 2, 2), dtype=np.uint8)
        ds = load_mnist(*write_mnist_pair(tmp_path, images, [1, 2, 3]))
        raw = ds.destandardized()
        assert np.allclose(raw, images.reshape(3, 4) / 255.0, rtol=0, atol=1e-12)
