import struct
from pathlib import Path

import numpy as np

from fitnets.data.dataset import Dataset
from fitnets.data.pipeline import Splits
from fitnets.data.synthetic import synthetic_dataset
from fitnets.netarch.dsl import parse_architecture
from fitnets.netarch.types import ArchitectureSpec


def naive_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: bool) -> np.ndarray:
    """Six nested loops; the reference every faster convolution must match."""
    batch, c, h, width = x.shape
    o, _, kh, kw = w.shape
    ph, pw = ((kh - 1) // 2, (kw - 1) // 2) if pad else (0, 0)
    xp = np.zeros((batch, c, h + 2 * ph, width + 2 * pw))
    xp[:, :, ph : ph + h, pw : pw + width] = x
    oh, ow = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    out = np.zeros((batch, o, oh, ow))
    for n in range(batch):
        for k in range(o):
            for i in range(oh):
                for j in range(ow):
                    total = b[k]
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                total += xp[n, ch, i + u, j + v] * w[k, ch, u, v]
                    out[n, k, i, j] = total
    return out


def write_idx(
    directory: Path,
    images: np.ndarray,
    labels: np.ndarray,
    *,
    prefix: str = "data",
) -> tuple[Path, Path]:
    """Write uint8 ``images`` (N, H, W) and ``labels`` (N,) as an IDX pair."""
    n, h, w = images.shape
    images_path = directory / f"{prefix}-images.idx"
    labels_path = directory / f"{prefix}-labels.idx"
    images_path.write_bytes(
        struct.pack(">IIII", 0x00000803, n, h, w) + images.astype(np.uint8).tobytes()
    )
    labels_path.write_bytes(struct.pack(">II", 0x00000801, n) + labels.astype(np.uint8).tobytes())
    return images_path, labels_path


TINY_TEACHER = """\
name tiny-teacher
input 1x8x8
conv 3x3x8 pad
relu
conv 3x3x8 pad
relu
pool 2x2
gpool
softmax 2
"""

TINY_STUDENT = """\
name tiny-student
input 1x8x8
hint 2 1
conv 3x3x4 pad
relu
conv 3x3x4 pad
relu
conv 3x3x4 pad
relu
pool 2x2
gpool
fc 8 pieces 2
softmax 2
"""


def tiny_teacher() -> ArchitectureSpec:
    return parse_architecture(TINY_TEACHER)


def tiny_student() -> ArchitectureSpec:
    return parse_architecture(TINY_STUDENT)


def tiny_splits(seed: int = 0, n: int = 96, classes: int = 2) -> Splits:
    """A small separable problem on 1x8x8 images, with a test split."""
    pool = synthetic_dataset(seed, n + 32, classes, (1, 8, 8))
    order = np.arange(len(pool))
    train = pool.take(order[: n - 32], "train")
    validation = pool.take(order[n - 32 : n], "validation")
    test = pool.take(order[n:], "test")
    return Splits(train, validation, test)


def ordered_dataset(n: int, classes: int = 2) -> Dataset:
    """Image ``i`` is filled with the value ``i``, so subsets reveal their indices."""
    images = np.broadcast_to(np.arange(n, dtype=np.float64)[:, None, None, None], (n, 1, 2, 2))
    return Dataset(np.ascontiguousarray(images), np.arange(n) % classes, classes)
