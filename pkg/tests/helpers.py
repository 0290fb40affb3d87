import struct

import numpy as np

from crossbar_bp import mnist_io


def toy_dataset(n, seed=0, classes=10):
    """Separable-ish synthetic digits: each class lights its own block of pixels."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    rng.shuffle(labels)
    raw = rng.integers(0, 256, (n, 784)) * (rng.random((n, 784)) < 0.02)
    for k in range(classes):
        rows = labels == k
        block = np.arange(k * 70, k * 70 + 30)
        raw[np.ix_(rows, block)] = rng.integers(150, 256, (rows.sum(), block.size))
    raw = np.clip(raw, 0, 255).astype(np.uint8)
    return raw, labels.astype(np.uint8)


def toy_split(n_train=300, n_test=100):
    train = mnist_io.normalize(*toy_dataset(n_train, 0))
    test = mnist_io.normalize(*toy_dataset(n_test, 1))
    return train, test


def write_idx_dir(path, n_train=300, n_test=100):
    path.mkdir(parents=True, exist_ok=True)
    for prefix, n, seed in (("train", n_train, 0), ("t10k", n_test, 1)):
        raw, labels = toy_dataset(n, seed)
        (path / f"{prefix}-images-idx3-ubyte").write_bytes(
            struct.pack(">IIII", 0x803, n, 28, 28) + raw.tobytes())
        (path / f"{prefix}-labels-idx1-ubyte").write_bytes(
            struct.pack(">II", 0x801, n) + labels.tobytes())
    return path
