"""Thin deep student networks trained from a wide teacher with hints and soft targets."""

import os

# BLAS reads its thread count when numpy is first imported.
_threads = os.environ.get("FITNETS_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from fitnets._version import __version__  # noqa: E402
from fitnets.distill import (  # noqa: E402
    DistillConfig,
    build_regressor,
    hint_loss,
    kd_loss,
    lambda_at_epoch,
    regressor_kernel_shape,
    regressor_param_count,
    softened_softmax,
)
from fitnets.errors import FitNetsError  # noqa: E402
from fitnets.netarch import ArchitectureSpec, build_named_arch, parse_architecture  # noqa: E402
from fitnets.train import (  # noqa: E402
    EarlyStopConfig,
    OptimizerConfig,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train_fitnet,
    train_supervised,
)

__all__ = [
    "__version__",
    "FitNetsError",
    "ArchitectureSpec",
    "build_named_arch",
    "parse_architecture",
    "DistillConfig",
    "softened_softmax",
    "kd_loss",
    "hint_loss",
    "build_regressor",
    "regressor_kernel_shape",
    "regressor_param_count",
    "lambda_at_epoch",
    "OptimizerConfig",
    "EarlyStopConfig",
    "train_supervised",
    "train_fitnet",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
]
