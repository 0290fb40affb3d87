import gzip
import struct

import numpy as np
import pytest

from crossbar_bp import mnist_io
from crossbar_bp.mnist_io import IdxFormatError

from .conftest import MNIST_DIR, needs_mnist


def write_images(path, pixels, magic=0x803, rows=28, cols=28, compress=False):
    raw = struct.pack(">IIII", magic, len(pixels), rows, cols) + np.asarray(
        pixels, dtype=np.uint8).tobytes()
    path.write_bytes(gzip.compress(raw) if compress else raw)
    return path


def write_labels(path, labels, magic=0x801):
    path.write_bytes(struct.pack(">II", magic, len(labels)) + bytes(labels))
    return path


def test_reads_images(tmp_path):
    px = np.arange(3 * 784).reshape(3, 784) % 256
    out = mnist_io.load_idx_images(write_images(tmp_path / "i", px))
    assert out.shape == (3, 784) and out.dtype == np.uint8
    np.testing.assert_array_equal(out, px)


def test_reads_gzipped_images(tmp_path):
    px = np.full((2, 784), 7)
    out = mnist_io.load_idx_images(write_images(tmp_path / "i.gz", px, compress=True))
    np.testing.assert_array_equal(out, px)


def test_label_file_passed_as_images(tmp_path):
    path = write_images(tmp_path / "i", np.zeros((1, 784)), magic=0x801)
    with pytest.raises(IdxFormatError, match="magic"):
        mnist_io.load_idx_images(path)


def test_truncated_images_name_lengths(tmp_path):
    path = write_images(tmp_path / "i", np.zeros((2, 784)))
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(IdxFormatError, match="expected 1568 payload bytes, found 1558"):
        mnist_io.load_idx_images(path)


def test_wrong_image_dimensions(tmp_path):
    path = write_images(tmp_path / "i", np.zeros((1, 100)), rows=10, cols=10)
    with pytest.raises(IdxFormatError, match="10x10"):
        mnist_io.load_idx_images(path)


def test_short_image_header(tmp_path):
    (tmp_path / "i").write_bytes(b"\x00\x00\x08")
    with pytest.raises(IdxFormatError, match="truncated"):
        mnist_io.load_idx_images(tmp_path / "i")


def test_reads_labels(tmp_path):
    out = mnist_io.load_idx_labels(write_labels(tmp_path / "l", [3, 1, 4, 1, 5]))
    np.testing.assert_array_equal(out, [3, 1, 4, 1, 5])


def test_label_out_of_range(tmp_path):
    with pytest.raises(IdxFormatError, match="12"):
        mnist_io.load_idx_labels(write_labels(tmp_path / "l", [1, 12]))


def test_empty_label_file(tmp_path):
    (tmp_path / "l").write_bytes(b"")
    with pytest.raises(IdxFormatError, match="truncated"):
        mnist_io.load_idx_labels(tmp_path / "l")


def test_label_wrong_magic_and_length(tmp_path):
    with pytest.raises(IdxFormatError, match="magic"):
        mnist_io.load_idx_labels(write_labels(tmp_path / "l", [1], magic=0x803))
    path = write_labels(tmp_path / "m", [1, 2, 3])
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(IdxFormatError, match="expected 3"):
        mnist_io.load_idx_labels(path)


def test_normalize():
    np.testing.assert_array_equal(mnist_io.normalize(np.array([0, 255])), [0.0, 1.0])
    assert mnist_io.normalize(np.array([128]))[0] == pytest.approx(0.50196, abs=1e-5)


def test_normalize_round_trip():
    raw = np.arange(256, dtype=np.uint8)
    back = np.rint(mnist_io.normalize(raw) * 255).astype(np.uint8)
    np.testing.assert_array_equal(back, raw)


def test_dataset_counts_must_agree():
    with pytest.raises(ValueError):
        mnist_io.normalize(np.zeros((3, 784)), np.zeros(2))
    ds = mnist_io.normalize(np.zeros((3, 784)), np.array([1, 2, 3]))
    assert ds.count == 3 and ds.subset(2).count == 2
    with pytest.raises(ValueError):
        ds.images[0, 0] = 1.0


def test_resolve_paths_from_env(tmp_path, monkeypatch):
    for name in mnist_io.FILENAMES.values():
        (tmp_path / (name + ".gz")).write_bytes(b"")
    monkeypatch.setenv(mnist_io.DATA_ENV, str(tmp_path))
    paths = mnist_io.resolve_paths()
    assert paths["test_labels"].name == "t10k-labels-idx1-ubyte.gz"
    other = tmp_path / "custom"
    assert mnist_io.resolve_paths(train_images=other)["train_images"] == other


def test_resolve_paths_missing(tmp_path, monkeypatch):
    monkeypatch.delenv(mnist_io.DATA_ENV, raising=False)
    with pytest.raises(FileNotFoundError, match="train_images"):
        mnist_io.resolve_paths()
    with pytest.raises(FileNotFoundError, match="train_images"):
        mnist_io.resolve_paths(tmp_path)


@needs_mnist
def test_official_files():
    train, test = mnist_io.load_mnist(MNIST_DIR)
    assert train.count == 60_000 and test.count == 10_000
    assert train.images.shape == (60_000, 784)
    assert 0.0 <= train.images.min() and train.images.max() == 1.0
    np.testing.assert_array_equal(train.labels[:5], [5, 0, 4, 1, 9])
    np.testing.assert_array_equal(test.labels[:5], [7, 2, 1, 0, 4])
