"""Stage-1 hint training on synthetic data with a realizable hint."""

import pytest

from fitnets.data.pipeline import Splits
from fitnets.data.preprocess import split
from fitnets.data.synthetic import synthetic_dataset
from fitnets.distill import build_regressor
from fitnets.netarch.counting import conv_output_shape
from fitnets.netarch.dsl import parse_architecture
from fitnets.train.loop import EarlyStopConfig, stage1_hint_train
from fitnets.train.optim import OptimizerConfig
from fitnets.train.params import init_params

# The teacher's first conv has no nonlinearity, so a linear student conv
# followed by a 1x1 linear regressor can reproduce the hint exactly.
TEACHER = parse_architecture(
    """\
name hint-teacher
input 1x8x8
conv 3x3x4 pad
conv 3x3x4 pad
relu
gpool
softmax 2
"""
)
STUDENT = parse_architecture(
    """\
name hint-student
input 1x8x8
hint 1 1
conv 3x3x4 pad
conv 3x3x2 pad
relu
gpool
softmax 2
"""
)


@pytest.mark.slow
def test_hint_loss_drops_fivefold_within_30_epochs() -> None:
    pool = synthetic_dataset(0, 2400, 2, (1, 8, 8))
    train, validation = split(pool, 2000, 400, seed=0)
    data = Splits(train, validation, None)
    teacher_params = init_params(TEACHER, 0.3, seed=11)
    regressor = build_regressor(
        conv_output_shape(TEACHER, 1),  # type: ignore[arg-type]
        conv_output_shape(STUDENT, 1),  # type: ignore[arg-type]
        TEACHER.conv_nonlinearity(1),  # type: ignore[arg-type]
        halfwidth=0.05,
        seed=3,
    )
    assert regressor.kernel == (1, 1)
    student_params = init_params(STUDENT, 0.05, seed=12)
    trained, report = stage1_hint_train(
        STUDENT,
        student_params,
        TEACHER,
        teacher_params,
        STUDENT.hint,
        regressor,
        data,
        OptimizerConfig(learning_rate=0.005, batch_size=64),
        EarlyStopConfig(patience_epochs=30, max_epochs=30),
        seed=0,
    )
    assert report.validation_metric == "hint_loss"
    assert report.initial_validation_error is not None
    assert report.best_validation_error * 5 <= report.initial_validation_error
    above = [name for name in student_params if not name.startswith("conv1.")]
    assert above
    assert trained.equals(student_params, above)
