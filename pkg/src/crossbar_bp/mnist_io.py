"""MNIST IDX reader.

IDX layout: big-endian uint32 magic (0x00000803 for images, 0x00000801 for
labels), big-endian uint32 count, then rows and cols for images, then raw
unsigned bytes.  Gzipped files are detected by their magic bytes.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATA_ENV = "CROSSBAR_BP_DATA"

FILENAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    pass


def _read(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx_images(path, rows: int = 28, cols: int = 28) -> np.ndarray:
    """Raw pixel bytes as a ``(count, rows * cols)`` uint8 array."""
    raw = _read(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes, need 16)")
    magic, count, r, c = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x} is not an image file "
                             f"(expected 0x{IMAGE_MAGIC:08x})")
    if (r, c) != (rows, cols):
        raise IdxFormatError(f"{path}: image dimensions {r}x{c}, expected {rows}x{cols}")
    expected = count * r * c
    payload = raw[16:]
    if len(payload) != expected:
        raise IdxFormatError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, r * c)


def load_idx_labels(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes, need 8)")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x} is not a label file "
                             f"(expected 0x{LABEL_MAGIC:08x})")
    payload = raw[8:]
    if len(payload) != count:
        raise IdxFormatError(f"{path}: expected {count} payload bytes, found {len(payload)}")
    labels = np.frombuffer(payload, dtype=np.uint8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxFormatError(f"{path}: label {labels[bad[0]]} at index {bad[0]} outside 0..9")
    return labels


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (count, 784) float64 in [0, 1]
    labels: np.ndarray  # (count,) int64 in 0..9

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def count(self) -> int:
        return len(self.labels)

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n])


def normalize(raw: np.ndarray, labels=None) -> Dataset | np.ndarray:
    """Scale pixel bytes to ``[0, 1]`` by dividing by 255.

    With ``labels`` given, returns a :class:`Dataset`; otherwise the scaled array.
    """
    images = np.asarray(raw, dtype=np.uint8).astype(np.float64) / 255.0
    if labels is None:
        return images
    return Dataset(images, np.asarray(labels, dtype=np.int64).copy())


def load_dataset(images_path, labels_path) -> Dataset:
    return normalize(load_idx_images(images_path), load_idx_labels(labels_path))


def resolve_paths(data_dir=None, **overrides) -> dict[str, Path]:
    """The four MNIST file paths.

    Explicit overrides win; otherwise files are looked up (plain or ``.gz``)
    in ``data_dir`` or the ``CROSSBAR_BP_DATA`` directory.
    """
    base = data_dir or os.environ.get(DATA_ENV)
    out = {}
    for key, name in FILENAMES.items():
        if overrides.get(key):
            out[key] = Path(overrides[key])
            continue
        if not base:
            raise FileNotFoundError(f"no path for {key}: pass it explicitly or set {DATA_ENV}")
        for candidate in (Path(base) / name, Path(base) / (name + ".gz")):
            if candidate.exists():
                out[key] = candidate
                break
        else:
            raise FileNotFoundError(f"{key}: neither {name} nor {name}.gz found in {base}")
    return out


def load_mnist(data_dir=None, **overrides) -> tuple[Dataset, Dataset]:
    paths = resolve_paths(data_dir, **overrides)
    return (load_dataset(paths["train_images"], paths["train_labels"]),
            load_dataset(paths["test_images"], paths["test_labels"]))
