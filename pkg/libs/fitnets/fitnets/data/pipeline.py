"""Dataset URIs and the load, split and preprocess pipeline.

Accepted URIs:

    synth://SEED/N/CLASSES/CxHxW     deterministic synthetic blobs
    idx:IMAGES,LABELS                IDX image/label pair (MNIST)
    cifar:BATCH[,BATCH...]           CIFAR-10 binary batches
"""

from __future__ import annotations

import re
from typing import Callable, NamedTuple, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from fitnets.data.dataset import Dataset, Split
from fitnets.data.formats import load_cifar_binary, load_idx
from fitnets.data.preprocess import (
    ZCA_EPSILON,
    downsample,
    global_contrast_normalize,
    split,
    zca_apply,
    zca_fit,
)
from fitnets.data.synthetic import synthetic_dataset
from fitnets.errors import DataFormatError

logger = structlog.getLogger(__name__)

_SYNTH = re.compile(r"^synth://(\d+)/(\d+)/(\d+)/(\d+)x(\d+)x(\d+)$")


def load_dataset_uri(uri: str, *, split: Split = "train") -> Dataset:
    match = _SYNTH.match(uri)
    if match:
        seed, n, classes, c, h, w = map(int, match.groups())
        return synthetic_dataset(seed, n, classes, (c, h, w), split=split)
    if uri.startswith("idx:"):
        parts = uri[len("idx:") :].split(",")
        if len(parts) != 2 or not all(parts):
            raise DataFormatError(f"expected idx:IMAGES,LABELS, got {uri!r}")
        return load_idx(parts[0], parts[1], split=split)
    if uri.startswith("cifar:"):
        parts = uri[len("cifar:") :].split(",")
        if not all(parts):
            raise DataFormatError(f"expected cifar:BATCH[,BATCH...], got {uri!r}")
        return load_cifar_binary(parts, split=split)
    raise DataFormatError(
        f"unrecognized dataset URI {uri!r}; expected synth://SEED/N/CLASSES/CxHxW, "
        "idx:IMAGES,LABELS or cifar:BATCH[,BATCH...]"
    )


class DataConfig(BaseModel):
    """Where the data comes from and how it is prepared."""

    train: str = Field(description="URI of the labelled pool split into training and validation.")
    test: Optional[str] = Field(default=None, description="URI of the test set.")
    train_n: Optional[int] = Field(default=None, ge=1, description="Training examples; default: all but validation.")
    validation_n: int = Field(default=0, ge=0)
    test_n: Optional[int] = Field(default=None, ge=1, description="Use only the first test_n test examples.")
    split_seed: int = 0
    downsample: int = Field(default=1, ge=1, description="Average-pooling factor applied to every split.")
    gcn: bool = False
    zca: bool = False
    zca_epsilon: float = Field(default=ZCA_EPSILON, gt=0)
    flip: bool = Field(default=False, description="Random horizontal flips of training examples per epoch.")

    @model_validator(mode="after")
    def _check_uris(self) -> "DataConfig":
        for uri in filter(None, (self.train, self.test)):
            if not (_SYNTH.match(uri) or uri.startswith(("idx:", "cifar:"))):
                raise ValueError(f"unrecognized dataset URI {uri!r}")
        return self


class Splits(NamedTuple):
    train: Dataset
    validation: Dataset
    test: Optional[Dataset]


def prepare_splits(config: DataConfig) -> Splits:
    """Load, split, downsample, contrast-normalize and whiten.

    ZCA is fit on the training split only and applied to every split.
    """
    pool = load_dataset_uri(config.train)
    train_n = config.train_n if config.train_n is not None else len(pool) - config.validation_n
    train, validation = split(pool, train_n, config.validation_n, config.split_seed)
    test = load_dataset_uri(config.test, split="test") if config.test else None
    if test is not None and config.test_n is not None:
        if config.test_n > len(test):
            raise DataFormatError(f"test_n={config.test_n} exceeds the {len(test)} test examples")
        test = test.take(np.arange(config.test_n))

    def each(fn: Callable[[Dataset], Dataset]) -> tuple[Dataset, Dataset, Optional[Dataset]]:
        return fn(train), fn(validation), (fn(test) if test is not None else None)

    if config.downsample > 1:
        train, validation, test = each(lambda d: downsample(d, config.downsample))
    if config.gcn:
        train, validation, test = each(global_contrast_normalize)
    if config.zca:
        transform = zca_fit(train, config.zca_epsilon)
        train, validation, test = each(lambda d: zca_apply(transform, d))
    logger.info(
        "data_prepared",
        train=len(train),
        validation=len(validation),
        test=None if test is None else len(test),
        input_shape=train.input_shape,
        classes=train.class_count,
    )
    return Splits(train, validation, test)
