"""Datasets: synthetic toy problems, IDX (MNIST-style) files and CSV tables."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CountMismatchError, DataError, MagicError, SpecError, TruncationError

__all__ = [
    "Dataset",
    "synthesize",
    "load_idx",
    "save_idx",
    "load_csv",
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

BLOB_CENTERS = np.array([[0.0, 2.0], [-1.7320508, -1.0], [1.7320508, -1.0]])


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float32)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.X.shape}")
        if len(self.X) != len(self.y):
            raise DataError(f"{len(self.X)} rows but {len(self.y)} labels")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def num_features(self) -> int:
        return self.X.shape[1]


def synthesize(kind: str, n: int, seed: int = 0, noise: float | None = None) -> Dataset:
    """Toy 2-D classification sets.

    ``xor``: sample ``i`` sits on corner ``i % 4`` of the unit square plus
    Gaussian noise (default sigma 0.1); label is the parity of the corner.
    ``blobs``: three Gaussian clusters (default sigma 0.5) with centres on a
    circle of radius 2; sample ``i`` belongs to cluster ``i % 3``.
    """
    if n < 4:
        raise SpecError(f"n must be >= 4, got {n}")
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    if kind == "xor":
        sigma = 0.1 if noise is None else noise
        corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)
        c = idx % 4
        X = corners[c] + sigma * rng.standard_normal((n, 2))
        y = corners[c].sum(axis=1).astype(np.int64) % 2
        return Dataset(X, y, 2)
    if kind == "blobs":
        sigma = 0.5 if noise is None else noise
        y = idx % 3
        X = BLOB_CENTERS[y] + sigma * rng.standard_normal((n, 2))
        return Dataset(X, y, 3)
    raise SpecError(f"unknown synthetic dataset {kind!r}; choose 'xor' or 'blobs'")


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(buf: bytes, expected_magic: int, what: str) -> np.ndarray:
    if len(buf) < 4:
        raise TruncationError(f"{what}: file shorter than the 4-byte magic")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expected_magic:
        raise MagicError(f"{what}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(buf) < head:
        raise TruncationError(f"{what}: header truncated")
    dims = struct.unpack(f">{ndim}I", buf[4:head])
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) < head + count:
        raise TruncationError(f"{what}: expected {count} data bytes, found {len(buf) - head}")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=head).reshape(dims)


def load_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Read an IDX image file (magic 0x803) and label file (magic 0x801).

    Images are flattened to ``rows * cols`` features scaled into [0, 1].
    Gzipped files are accepted when the name ends in ``.gz``.
    """
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, "images")
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, "labels")
    if len(images) != len(labels):
        raise CountMismatchError(f"{len(images)} images but {len(labels)} labels")
    X = images.reshape(len(images), -1).astype(np.float32) / 255.0
    y = labels.astype(np.int64)
    num_classes = max(num_classes, int(y.max()) + 1 if len(y) else 0)
    return Dataset(X, y, num_classes)


def save_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write ``uint8`` images ``(n, rows, cols)`` and labels ``(n,)`` as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError(f"images must be (n, rows, cols), got {images.shape}")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def load_csv(path, label_column: int | str = -1, num_classes: int | None = None) -> Dataset:
    """Numeric CSV with one integer label column.

    A string ``label_column`` names a column of the header row; an integer
    indexes columns of a header-less file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if isinstance(label_column, str):
        if not rows:
            raise DataError(f"{path}: empty file")
        header, rows = rows[0], rows[1:]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        col = header.index(label_column)
    else:
        col = label_column
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError(f"{path}: inconsistent column counts")
    table = np.array(rows, dtype=np.float64)
    y = table[:, col]
    if not np.all(y == np.round(y)):
        raise DataError(f"{path}: labels must be integers")
    X = np.delete(table, col % width, axis=1)
    y = y.astype(np.int64)
    k = num_classes if num_classes is not None else int(y.max()) + 1
    return Dataset(X, y, k)
