"""Trainers: supervised baseline, hint training, KD training and the two-stage pipeline.

Every trainer shares one epoch loop:

- the epoch's example order comes from a generator seeded with (seed, epoch),
  the last partial batch is kept;
- the model is scored on the validation split after every epoch, and only a
  strict improvement counts;
- training stops ``patience_epochs`` epochs after the best epoch, or after
  ``max_epochs``; the parameters of the best epoch are returned.
"""

from __future__ import annotations

import math
import time
from typing import Callable, Literal, Mapping, NamedTuple, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from fitnets.data.dataset import Dataset
from fitnets.data.pipeline import Splits
from fitnets.data.preprocess import apply_flip, flip_mask
from fitnets.distill import (
    DistillConfig,
    Regressor,
    build_regressor,
    cross_entropy,
    half_squared_error,
    hint_loss,
    kd_loss,
    lambda_at_epoch,
    one_hot,
)
from fitnets.errors import (
    ArchitectureError,
    ArityError,
    DataFormatError,
    DistillError,
    DivergenceError,
    ShapeError,
)
from fitnets.netarch.counting import conv_output_shape
from fitnets.netarch.types import ArchitectureSpec, HintPair
from fitnets.tensor.ops import Tensor, get_default_dtype
from fitnets.train.checkpoint import Checkpoint
from fitnets.train.network import Network
from fitnets.train.optim import Optimizer, OptimizerConfig, learning_rate_at
from fitnets.train.params import ParameterSet, derive_seed, init_params
from fitnets.train.report import EpochRecord, Stage, TrainReport

logger = structlog.getLogger(__name__)

Mode = Literal["ht", "kd", "backprop"]
BatchObjective = Callable[[Tensor, Tensor, int], tuple[float, Mapping[str, Tensor]]]

EVAL_BATCH_SIZE = 256
_REGRESSOR_STREAM = 1


class EarlyStopConfig(BaseModel):
    patience_epochs: int = Field(default=100, ge=1)
    max_epochs: int = Field(default=500, ge=1)

    @model_validator(mode="after")
    def _check_patience(self) -> "EarlyStopConfig":
        if self.patience_epochs > self.max_epochs:
            raise ValueError(
                f"patience_epochs ({self.patience_epochs}) must not exceed max_epochs ({self.max_epochs})"
            )
        return self


class FitNetResult(NamedTuple):
    params: ParameterSet
    reports: dict[str, TrainReport]


def _check_arity(arch: ArchitectureSpec, dataset: Dataset) -> None:
    if arch.class_count != dataset.class_count:
        raise ArityError(
            f"{arch.name} predicts {arch.class_count} classes, "
            f"{dataset.split} data has {dataset.class_count}"
        )
    if dataset.input_shape != tuple(arch.input_shape):
        raise ShapeError(
            f"{arch.name} expects inputs {tuple(arch.input_shape)}, "
            f"{dataset.split} data is {dataset.input_shape}"
        )


def _check_splits(arch: ArchitectureSpec, data: Splits) -> None:
    if len(data.train) == 0:
        raise DataFormatError("training split is empty")
    if len(data.validation) == 0:
        raise DataFormatError("validation split is empty; early stopping needs one")
    for dataset in filter(None, data):
        _check_arity(arch, dataset)


def evaluate(
    params: Mapping[str, Tensor],
    arch: ArchitectureSpec,
    dataset: Dataset,
    *,
    batch_size: int = EVAL_BATCH_SIZE,
    network: Optional[Network] = None,
) -> float:
    """Misclassification rate of argmax predictions (ties to the lowest class)."""
    _check_arity(arch, dataset)
    if len(dataset) == 0:
        raise DataFormatError(f"cannot evaluate on an empty {dataset.split} split")
    net = network or Network(arch)
    predictions = net.predict(dataset.images, params, batch_size=batch_size)
    return float(np.count_nonzero(predictions != dataset.labels) / len(dataset))


def _epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(n)


def _run_stage(
    *,
    stage: Stage,
    arch_name: str,
    params: ParameterSet,
    objective: BatchObjective,
    validate: Callable[[ParameterSet], float],
    train: Dataset,
    optimizer: OptimizerConfig,
    stop: EarlyStopConfig,
    seed: int,
    flip: bool = False,
    lambda_at: Optional[Callable[[int], float]] = None,
    validation_metric: Literal["misclassification", "hint_loss"] = "misclassification",
) -> TrainReport:
    """Train ``params`` in place; on return they hold the best epoch's values."""
    n = len(train)
    if n == 0:
        raise DataFormatError("training split is empty")
    opt = Optimizer(optimizer)
    report = TrainReport(stage=stage, arch=arch_name, seed=seed, validation_metric=validation_metric)
    if validation_metric == "hint_loss":
        report.initial_validation_error = validate(params)
    targets = one_hot(train.labels, train.class_count, get_default_dtype())
    best = math.inf
    best_params = params.copy()
    stage_start = time.perf_counter()
    logger.info("stage_start", stage=stage, arch=arch_name, examples=n, seed=seed)

    report.stopping_reason = "max_epochs"
    for epoch in range(stop.max_epochs):
        epoch_start = time.perf_counter()
        images = train.images
        if flip:
            images = apply_flip(images, flip_mask(n, seed, epoch))
        order = _epoch_order(n, seed, epoch)
        total = 0.0
        for start in range(0, n, optimizer.batch_size):
            index = order[start : start + optimizer.batch_size]
            loss, grads = objective(images[index], targets[index], epoch)
            if not math.isfinite(loss):
                logger.error("training_diverged", stage=stage, epoch=epoch, batch=start // optimizer.batch_size)
                raise DivergenceError(f"{stage}: non-finite loss in epoch {epoch}")
            opt.step(params, grads, epoch)
            total += loss * len(index)

        score = validate(params)
        if not math.isfinite(score):
            logger.error("validation_diverged", stage=stage, epoch=epoch, score=score)
            raise DivergenceError(f"{stage}: non-finite validation score in epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            train_loss=total / n,
            validation_error=score,
            lambda_=None if lambda_at is None else lambda_at(epoch),
            learning_rate=learning_rate_at(optimizer, epoch),
            wall_clock_seconds=time.perf_counter() - epoch_start,
        )
        report.epochs.append(record)
        logger.info(
            "epoch_complete",
            stage=stage,
            epoch=epoch,
            train_loss=record.train_loss,
            validation_error=score,
            lambda_=record.lambda_,
        )
        if score < best:
            best = score
            report.best_epoch = epoch
            best_params = params.copy()
        elif epoch - report.best_epoch >= stop.patience_epochs:
            report.stopping_reason = "patience"
            break

    params.update_from(best_params)
    report.best_validation_error = best
    report.wall_clock_seconds = time.perf_counter() - stage_start
    logger.info(
        "stage_complete",
        stage=stage,
        epochs=len(report.epochs),
        best_epoch=report.best_epoch,
        best_validation_error=best,
        stopping_reason=report.stopping_reason,
    )
    return report


def _attach_test_error(
    report: TrainReport, params: ParameterSet, arch: ArchitectureSpec, data: Splits
) -> None:
    if data.test is not None:
        report.test_error = evaluate(params, arch, data.test)


def train_supervised(
    arch: ArchitectureSpec,
    data: Splits,
    opt: OptimizerConfig,
    stop: EarlyStopConfig,
    seed: int,
    *,
    halfwidth: float = 0.005,
    params: Optional[ParameterSet] = None,
    flip: bool = False,
) -> tuple[ParameterSet, TrainReport]:
    """Cross-entropy training against the labels (standard backprop)."""
    _check_splits(arch, data)
    params = init_params(arch, halfwidth, seed) if params is None else params.copy()
    net = Network(arch)

    def objective(x: Tensor, y: Tensor, epoch: int) -> tuple[float, Mapping[str, Tensor]]:
        loss, grad = cross_entropy(y, net.forward(x, params))
        _, grads = net.backward(grad)
        return loss, grads

    report = _run_stage(
        stage="supervised",
        arch_name=arch.name,
        params=params,
        objective=objective,
        validate=lambda p: evaluate(p, arch, data.validation, network=net),
        train=data.train,
        optimizer=opt,
        stop=stop,
        seed=seed,
        flip=flip,
    )
    _attach_test_error(report, params, arch, data)
    return params, report


def stage1_hint_train(
    student_arch: ArchitectureSpec,
    student_params: ParameterSet,
    teacher_arch: ArchitectureSpec,
    teacher_params: Mapping[str, Tensor],
    hint: HintPair,
    regressor: Regressor,
    data: Splits,
    opt: OptimizerConfig,
    stop: EarlyStopConfig,
    seed: int,
    *,
    flip: bool = False,
) -> tuple[ParameterSet, TrainReport]:
    """Fit the student up to the guided layer, plus the regressor, to the teacher's hint.

    Only the guided-layer parameters and the regressor move. The returned
    student set is a copy of ``student_params`` with the trained guided
    parameters written back; ``regressor.params`` holds the trained regressor.
    """
    _check_splits(student_arch, data)
    guided_boundary = student_arch.conv_boundary(hint.guided)
    hint_boundary = teacher_arch.conv_boundary(hint.hint)
    student_net, teacher_net = Network(student_arch), Network(teacher_arch)
    guided_names = student_net.param_names_until(guided_boundary)
    work = student_params.subset(guided_names).merged(
        {name: value.copy() for name, value in regressor.params.items()}
    )

    def objective(x: Tensor, y: Tensor, epoch: int) -> tuple[float, Mapping[str, Tensor]]:
        target = teacher_net.forward(x, teacher_params, until=hint_boundary)
        guided = student_net.forward(x, work, until=guided_boundary)
        loss, grad_guided, grad_regressor = hint_loss(target, guided, regressor, work)
        _, grads = student_net.backward(grad_guided)
        grads.update(grad_regressor)
        return loss, grads

    def validate(p: ParameterSet) -> float:
        images = data.validation.images
        total = 0.0
        for start in range(0, len(images), EVAL_BATCH_SIZE):
            x = images[start : start + EVAL_BATCH_SIZE]
            target = teacher_net.forward(x, teacher_params, until=hint_boundary)
            guided = student_net.forward(x, p, until=guided_boundary)
            loss, _ = half_squared_error(target, regressor.forward(guided, p))
            total += loss * len(x)
        return total / len(images)

    report = _run_stage(
        stage="stage1",
        arch_name=student_arch.name,
        params=work,
        objective=objective,
        validate=validate,
        train=data.train,
        optimizer=opt,
        stop=stop,
        seed=seed,
        flip=flip,
        validation_metric="hint_loss",
    )
    regressor.params = {name: work[name] for name in regressor.params}
    trained = student_params.copy()
    trained.update_from(work)
    return trained, report


def stage2_kd_train(
    student_arch: ArchitectureSpec,
    student_params: ParameterSet,
    teacher_arch: ArchitectureSpec,
    teacher_params: Mapping[str, Tensor],
    distill: DistillConfig,
    data: Splits,
    opt: OptimizerConfig,
    stop: EarlyStopConfig,
    seed: int,
    *,
    flip: bool = False,
) -> tuple[ParameterSet, TrainReport]:
    """Train the whole student on labels plus the teacher's softened outputs.

    The soft-term weight follows ``lambda_at_epoch`` and is constant within an epoch.
    """
    _check_splits(student_arch, data)
    params = student_params.copy()
    student_net, teacher_net = Network(student_arch), Network(teacher_arch)

    def objective(x: Tensor, y: Tensor, epoch: int) -> tuple[float, Mapping[str, Tensor]]:
        lam = lambda_at_epoch(distill, epoch)
        student_logits = student_net.forward(x, params)
        # lam == 0 leaves only the hard term; the teacher pass is skipped.
        teacher_logits = teacher_net.forward(x, teacher_params) if lam > 0 else student_logits
        loss, grad = kd_loss(
            y,
            student_logits,
            teacher_logits,
            distill.tau,
            lam,
            tau_squared=distill.tau_squared,
        )
        _, grads = student_net.backward(grad)
        return loss, grads

    report = _run_stage(
        stage="stage2",
        arch_name=student_arch.name,
        params=params,
        objective=objective,
        validate=lambda p: evaluate(p, student_arch, data.validation, network=student_net),
        train=data.train,
        optimizer=opt,
        stop=stop,
        seed=seed,
        flip=flip,
        lambda_at=lambda epoch: lambda_at_epoch(distill, epoch),
    )
    _attach_test_error(report, params, student_arch, data)
    return params, report


def resolve_hint(
    teacher_arch: ArchitectureSpec, student_arch: ArchitectureSpec, distill: DistillConfig
) -> HintPair:
    """The (guided, hint) pair from the config, falling back to the student's declaration."""
    declared = student_arch.hint
    guided = distill.guided_index or (declared.guided if declared else None)
    hint = distill.hint_index or (declared.hint if declared else None)
    if guided is None or hint is None:
        raise DistillError(
            f"no hint pair for {student_arch.name}: set distill hint_index and guided_index "
            "or declare 'hint G H' in the student architecture"
        )
    for arch, index, role in ((student_arch, guided, "guided"), (teacher_arch, hint, "hint")):
        if not 1 <= index <= arch.conv_count:
            raise DistillError(
                f"{role} index {index} out of range: {arch.name} has {arch.conv_count} conv layers"
            )
    return HintPair(guided, hint)


def _build_hint_regressor(
    teacher_arch: ArchitectureSpec,
    student_arch: ArchitectureSpec,
    hint: HintPair,
    halfwidth: float,
    seed: int,
) -> Regressor:
    try:
        hint_shape = conv_output_shape(teacher_arch, hint.hint)
        guided_shape = conv_output_shape(student_arch, hint.guided)
    except ArchitectureError as e:
        raise DistillError(str(e)) from None
    if len(hint_shape) != 3 or len(guided_shape) != 3:
        raise DistillError(f"hint {hint_shape} and guided {guided_shape} outputs must be feature maps")
    return build_regressor(
        hint_shape,  # type: ignore[arg-type]
        guided_shape,  # type: ignore[arg-type]
        teacher_arch.conv_nonlinearity(hint.hint),  # type: ignore[arg-type]
        halfwidth=halfwidth,
        seed=derive_seed(seed, _REGRESSOR_STREAM),
    )


def train_fitnet(
    teacher: Checkpoint,
    student_arch: ArchitectureSpec,
    distill: DistillConfig,
    data: Splits,
    opt: OptimizerConfig,
    stop: EarlyStopConfig,
    *,
    mode: Mode = "ht",
    seed: int = 0,
    halfwidth: float = 0.005,
    skip_stage1: bool = False,
    flip: bool = False,
) -> FitNetResult:
    """Train a student from a frozen teacher.

    ``ht``: hint training of the lower student layers, copy back, then KD of
    the whole student. ``kd``: KD from a fresh initialization. ``backprop``:
    labels only; the teacher is not used. All validation happens before the
    first epoch.
    """
    teacher_arch, teacher_params = teacher
    _check_splits(student_arch, data)
    if mode != "backprop":
        _check_splits(teacher_arch, data)

    if mode == "backprop":
        params, report = train_supervised(
            student_arch, data, opt, stop, seed, halfwidth=halfwidth, flip=flip
        )
        return FitNetResult(params, {"supervised": report})

    reports: dict[str, TrainReport] = {}
    regressor = None
    hint = None
    if mode == "ht" and not skip_stage1:
        hint = resolve_hint(teacher_arch, student_arch, distill)
        regressor = _build_hint_regressor(teacher_arch, student_arch, hint, halfwidth, seed)

    params = init_params(student_arch, halfwidth, seed)
    if regressor is not None and hint is not None:
        logger.info(
            "hint_pair",
            guided=hint.guided,
            hint=hint.hint,
            regressor_kernel=regressor.kernel,
            regressor_params=regressor.size,
        )
        params, reports["stage1"] = stage1_hint_train(
            student_arch, params, teacher_arch, teacher_params, hint, regressor, data, opt, stop, seed, flip=flip
        )
    params, reports["stage2"] = stage2_kd_train(
        student_arch, params, teacher_arch, teacher_params, distill, data, opt, stop, seed, flip=flip
    )
    return FitNetResult(params, reports)
