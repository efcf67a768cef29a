from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from fitnets.errors import DataFormatError
from fitnets.tensor.ops import Tensor

Split = Literal["train", "validation", "test"]


@dataclass(frozen=True)
class Dataset:
    """Images ``(N, C, H, W)`` with one integer label each."""

    images: Tensor
    labels: np.ndarray
    class_count: int
    split: Split = "train"

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise DataFormatError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.images.shape[0]:
            raise DataFormatError(
                f"{self.images.shape[0]} images but labels have shape {self.labels.shape}"
            )
        if self.class_count < 0 or (len(self) and self.class_count < 1):
            raise DataFormatError(f"class_count must be positive, got {self.class_count}")
        if len(self) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataFormatError(
                f"labels must lie in [0, {self.class_count}), got "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def __repr__(self) -> str:
        return (
            f"Dataset(split={self.split!r}, n={len(self)}, shape={self.input_shape}, "
            f"classes={self.class_count})"
        )

    @property
    def input_shape(self) -> tuple[int, int, int]:
        c, h, w = self.images.shape[1:]
        return int(c), int(h), int(w)

    def take(self, indices: np.ndarray, split: Split | None = None) -> "Dataset":
        return Dataset(
            self.images[indices], self.labels[indices], self.class_count, split or self.split
        )

    def with_images(self, images: Tensor) -> "Dataset":
        return replace(self, images=images)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)
