from fitnets.data.dataset import Dataset, Split
from fitnets.data.formats import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    load_cifar_binary,
    load_idx,
)
from fitnets.data.pipeline import DataConfig, Splits, load_dataset_uri, prepare_splits
from fitnets.data.preprocess import (
    ZcaTransform,
    apply_flip,
    downsample,
    flip_mask,
    global_contrast_normalize,
    random_flip,
    split,
    zca_apply,
    zca_fit,
)
from fitnets.data.synthetic import synthetic_dataset

__all__ = [
    "Dataset",
    "Split",
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
    "load_idx",
    "load_cifar_binary",
    "synthetic_dataset",
    "global_contrast_normalize",
    "ZcaTransform",
    "zca_fit",
    "zca_apply",
    "downsample",
    "flip_mask",
    "apply_flip",
    "random_flip",
    "split",
    "DataConfig",
    "Splits",
    "load_dataset_uri",
    "prepare_splits",
]
