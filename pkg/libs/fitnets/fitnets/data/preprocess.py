"""Preprocessing, augmentation and splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog

from fitnets.data.dataset import Dataset
from fitnets.errors import DataFormatError
from fitnets.tensor.ops import Tensor, as_tensor

logger = structlog.getLogger(__name__)

GCN_MIN_STD = 1e-8
ZCA_EPSILON = 1e-5
_FLIP_STREAM = 1


def global_contrast_normalize(dataset: Dataset) -> Dataset:
    """Per image: subtract its mean, divide by max(its std, 1e-8)."""
    n = len(dataset)
    if n == 0:
        return dataset
    flat = dataset.images.reshape(n, -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    std = np.sqrt((centered * centered).mean(axis=1, keepdims=True))
    out = centered / np.maximum(std, GCN_MIN_STD)
    return dataset.with_images(as_tensor(out.reshape(dataset.images.shape)))


@dataclass(frozen=True)
class ZcaTransform:
    mean: Tensor
    """Per-dimension mean of the fitting set, length C*H*W."""
    whitening: Tensor
    """Symmetric (C*H*W, C*H*W) matrix E diag(1/sqrt(l + eps)) E^T."""
    epsilon: float


def zca_fit(dataset: Dataset, epsilon: float = ZCA_EPSILON) -> ZcaTransform:
    """Fit ZCA whitening on ``dataset`` (the training split only)."""
    if epsilon <= 0:
        raise DataFormatError(f"ZCA epsilon must be positive, got {epsilon}")
    n = len(dataset)
    if n == 0:
        raise DataFormatError("cannot fit ZCA on an empty dataset")
    flat = dataset.images.reshape(n, -1).astype(np.float64)
    mean = flat.mean(axis=0)
    centered = flat - mean
    covariance = centered.T @ centered / n
    if not np.all(np.isfinite(covariance)):
        raise DataFormatError("ZCA covariance has non-finite entries")
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    # eigh can return tiny negative eigenvalues for singular covariances.
    scale = 1.0 / np.sqrt(np.maximum(eigenvalues, 0.0) + epsilon)
    whitening = (eigenvectors * scale) @ eigenvectors.T
    logger.debug("zca_fit", n=n, dims=mean.size, epsilon=epsilon)
    return ZcaTransform(mean, whitening, epsilon)


def zca_apply(transform: ZcaTransform, dataset: Dataset) -> Dataset:
    n = len(dataset)
    if n == 0:
        return dataset
    flat = dataset.images.reshape(n, -1)
    if flat.shape[1] != transform.mean.size:
        raise DataFormatError(
            f"ZCA was fit on {transform.mean.size} dimensions, images have {flat.shape[1]}"
        )
    out = (flat - transform.mean) @ transform.whitening
    return dataset.with_images(as_tensor(out.reshape(dataset.images.shape)))


def downsample(dataset: Dataset, factor: int = 2) -> Dataset:
    """Average-pool each image over ``factor x factor`` blocks (trailing rows/cols dropped)."""
    if factor < 1:
        raise DataFormatError(f"downsample factor must be positive, got {factor}")
    if factor == 1:
        return dataset
    n, c, h, w = dataset.images.shape
    oh, ow = h // factor, w // factor
    if oh < 1 or ow < 1:
        raise DataFormatError(f"cannot downsample {h}x{w} images by {factor}")
    blocks = dataset.images[:, :, : oh * factor, : ow * factor].reshape(n, c, oh, factor, ow, factor)
    return dataset.with_images(as_tensor(blocks.mean(axis=(3, 5))))


def flip_mask(n: int, seed: int, epoch: int, probability: float = 0.5) -> np.ndarray:
    """Which of ``n`` examples are mirrored in ``epoch``.

    Example ``i`` uses the ``i``-th draw of the stream seeded by (seed, epoch).
    The stream is separate from the one that shuffles the epoch.
    """
    if not 0.0 <= probability <= 1.0:
        raise DataFormatError(f"flip probability must be in [0, 1], got {probability}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch, _FLIP_STREAM]))
    return rng.random(n) < probability


def apply_flip(images: Tensor, mask: np.ndarray) -> Tensor:
    """Mirror the width axis of the images selected by ``mask``."""
    out = images.copy()
    out[mask] = images[mask][..., ::-1]
    return out


def random_flip(dataset: Dataset, seed: int, epoch: int, probability: float = 0.5) -> Dataset:
    """One epoch's horizontally flipped copy of a training split."""
    if dataset.split != "train":
        raise DataFormatError(f"random flipping applies to the training split, got {dataset.split!r}")
    mask = flip_mask(len(dataset), seed, epoch, probability)
    return dataset.with_images(apply_flip(dataset.images, mask))


def split(dataset: Dataset, train_n: int, val_n: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``train_n`` for training and the next ``val_n`` for validation."""
    if train_n < 0 or val_n < 0 or train_n + val_n > len(dataset):
        raise DataFormatError(
            f"cannot split {len(dataset)} examples into {train_n} training "
            f"and {val_n} validation examples"
        )
    order = np.random.default_rng(seed).permutation(len(dataset))
    return (
        dataset.take(order[:train_n], "train"),
        dataset.take(order[train_n : train_n + val_n], "validation"),
    )
