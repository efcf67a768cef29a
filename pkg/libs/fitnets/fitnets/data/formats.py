"""Readers for IDX (MNIST) and CIFAR-10 binary batch files."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable

import numpy as np
import structlog

from fitnets.data.dataset import Dataset, Split
from fitnets.errors import DataFormatError
from fitnets.tensor.ops import as_tensor

logger = structlog.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

IDX_CLASSES = 10

CIFAR_SHAPE = (3, 32, 32)
CIFAR_CLASSES = 10
_CIFAR_RECORD = 1 + 3 * 32 * 32


def _read(path: str | os.PathLike[str]) -> bytes:
    p = Path(path)
    try:
        return p.read_bytes()
    except FileNotFoundError:
        raise DataFormatError(f"dataset file not found: {p}") from None
    except OSError as e:
        raise DataFormatError(f"cannot read {p}: {e.strerror}") from None


def _idx_header(data: bytes, path: str, magic: int, ndims: int) -> tuple[int, ...]:
    if len(data) < 4:
        raise DataFormatError(f"{path}: truncated IDX header, expected 4 magic bytes, found {len(data)}")
    found = int.from_bytes(data[:4], "big")
    if found != magic:
        raise DataFormatError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndims
    if len(data) < header:
        raise DataFormatError(
            f"{path}: truncated IDX header, expected {header} bytes, found {len(data)}"
        )
    dims = tuple(int(d) for d in np.frombuffer(data, dtype=">u4", count=ndims, offset=4))
    expected = header + int(np.prod(dims))
    if len(data) != expected:
        raise DataFormatError(
            f"{path}: truncated IDX data, expected {expected} bytes, found {len(data)}"
        )
    return dims


def load_idx(
    images_path: str | os.PathLike[str],
    labels_path: str | os.PathLike[str],
    *,
    class_count: int = IDX_CLASSES,
    split: Split = "train",
) -> Dataset:
    """Load an IDX image/label pair, scaling pixel bytes to [0, 1].

    ``class_count`` defaults to the ten digit classes, whatever labels occur.
    """
    image_bytes, label_bytes = _read(images_path), _read(labels_path)
    n, h, w = _idx_header(image_bytes, str(images_path), IDX_IMAGES_MAGIC, 3)
    (n_labels,) = _idx_header(label_bytes, str(labels_path), IDX_LABELS_MAGIC, 1)
    if n != n_labels:
        raise DataFormatError(
            f"image/label count mismatch: {images_path} has {n} images, "
            f"{labels_path} has {n_labels} labels"
        )
    if n:
        pixels = np.frombuffer(image_bytes, dtype=np.uint8, offset=16).reshape(n, 1, h, w)
        labels = np.frombuffer(label_bytes, dtype=np.uint8, offset=8).astype(np.int64)
    else:
        pixels = np.zeros((0, 1, h, w), dtype=np.uint8)
        labels = np.zeros(0, dtype=np.int64)
    logger.debug("idx_loaded", images=str(images_path), n=n, height=h, width=w)
    return Dataset(as_tensor(pixels / 255.0), labels, class_count, split)


def load_cifar_binary(paths: Iterable[str | os.PathLike[str]], *, split: Split = "train") -> Dataset:
    """Concatenate CIFAR-10 binary batches (1 label byte + 3072 pixel bytes per record)."""
    images, labels = [], []
    for path in paths:
        data = _read(path)
        if len(data) % _CIFAR_RECORD:
            raise DataFormatError(
                f"{path}: {len(data)} bytes is not a whole number of {_CIFAR_RECORD}-byte records"
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
        labels.append(records[:, 0].astype(np.int64))
        images.append(records[:, 1:].reshape(-1, *CIFAR_SHAPE))
    if not images:
        raise DataFormatError("no CIFAR batch files given")
    label_array = np.concatenate(labels)
    if label_array.size and label_array.max() >= CIFAR_CLASSES:
        raise DataFormatError(f"CIFAR label {label_array.max()} out of range")
    return Dataset(as_tensor(np.concatenate(images) / 255.0), label_array, CIFAR_CLASSES, split)
