"""Hint training beats KD, which beats plain backprop, on MNIST.

Needs the four IDX files under ``FITNETS_MNIST_DIR``. Training is long; the
budget can be reduced with ``FITNETS_MNIST_TRAIN_N`` and ``FITNETS_MNIST_EPOCHS``.
"""

import os
from pathlib import Path

import pytest

from fitnets.data.pipeline import DataConfig, prepare_splits
from fitnets.distill import DistillConfig
from fitnets.netarch.zoo import build_named_arch
from fitnets.train.checkpoint import Checkpoint
from fitnets.train.loop import EarlyStopConfig, train_fitnet, train_supervised
from fitnets.train.optim import OptimizerConfig

MNIST_DIR = os.environ.get("FITNETS_MNIST_DIR")
TRAIN_N = int(os.environ.get("FITNETS_MNIST_TRAIN_N", "50000"))
EPOCHS = int(os.environ.get("FITNETS_MNIST_EPOCHS", "50"))
SEEDS = (1, 2, 3, 4, 5)

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(MNIST_DIR is None, reason="FITNETS_MNIST_DIR is not set"),
]


def _data_config() -> DataConfig:
    root = Path(MNIST_DIR or ".")
    return DataConfig(
        train=f"idx:{root / 'train-images-idx3-ubyte'},{root / 'train-labels-idx1-ubyte'}",
        test=f"idx:{root / 't10k-images-idx3-ubyte'},{root / 't10k-labels-idx1-ubyte'}",
        train_n=TRAIN_N,
        validation_n=10000,
    )


@pytest.mark.timeout(0)
def test_hints_then_kd_then_backprop() -> None:
    data = prepare_splits(_data_config())
    opt = OptimizerConfig()
    stop = EarlyStopConfig(patience_epochs=max(EPOCHS // 5, 1), max_epochs=EPOCHS)
    distill = DistillConfig(anneal_epochs=EPOCHS)
    teacher_arch = build_named_arch("mnist-teacher")
    student_arch = build_named_arch("mnist-student")
    teacher_params, teacher_report = train_supervised(teacher_arch, data, opt, stop, seed=0)
    teacher = Checkpoint(teacher_arch, teacher_params)
    assert teacher_report.test_error is not None

    ordered = 0
    for seed in SEEDS:
        errors = {}
        for mode in ("ht", "kd", "backprop"):
            _, reports = train_fitnet(
                teacher, student_arch, distill, data, opt, stop, mode=mode, seed=seed
            )
            final = reports["supervised" if mode == "backprop" else "stage2"]
            assert final.test_error is not None
            errors[mode] = final.test_error
        assert errors["ht"] < errors["backprop"], f"seed {seed}: {errors}"
        if errors["ht"] <= errors["kd"] <= errors["backprop"]:
            ordered += 1
    assert ordered >= len(SEEDS) - 1
