from __future__ import annotations

import numpy as np

from fitnets.data.dataset import Dataset, Split
from fitnets.errors import DataFormatError
from fitnets.tensor.ops import as_tensor

NOISE_STD = 0.15


def synthetic_dataset(
    seed: int,
    n: int,
    classes: int,
    shape: tuple[int, int, int],
    *,
    noise_std: float = NOISE_STD,
    split: Split = "train",
) -> Dataset:
    """Gaussian blobs around one random mean image per class, clipped to [0, 1].

    Labels are ``arange(n) % classes`` in shuffled order, so class counts
    differ by at most one.
    """
    if classes < 1:
        raise DataFormatError(f"classes must be positive, got {classes}")
    if n < classes:
        raise DataFormatError(f"need at least one example per class: n={n} < classes={classes}")
    if len(shape) != 3 or min(shape) < 1:
        raise DataFormatError(f"shape must be (C, H, W) with positive extents, got {shape}")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, 1.0, size=(classes, *shape))
    labels = rng.permutation(np.arange(n) % classes)
    images = means[labels] + rng.normal(0.0, noise_std, size=(n, *shape))
    return Dataset(as_tensor(np.clip(images, 0.0, 1.0)), labels.astype(np.int64), classes, split)
