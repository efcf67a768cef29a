"""Distillation losses, hint regressors and the soft-target weight schedule.

All losses are averaged over the batch and return their gradient w.r.t. the
student-side input, so they plug straight into a backward pass.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from fitnets.errors import DistillError, ShapeError
from fitnets.netarch.types import MaxoutSpec, ReLUSpec, SigmoidSpec
from fitnets.tensor.ops import Conv2d, DiffOp, Maxout, ReLU, Sigmoid, Tensor, uniform_init

logger = structlog.getLogger(__name__)

HintNonlinearity = Union[MaxoutSpec, ReLUSpec, SigmoidSpec, None]


class DistillConfig(BaseModel):
    """Knobs of the two-stage distillation objective."""

    tau: float = Field(default=3.0, ge=1.0, description="Softmax temperature.")
    lambda_init: float = Field(default=4.0, ge=0.0, description="Soft-term weight at epoch 0.")
    lambda_final: float = Field(default=1.0, ge=0.0, description="Soft-term weight after annealing.")
    anneal_epochs: int = Field(default=500, ge=1, description="Epochs of linear decay.")
    hint_index: Optional[int] = Field(default=None, ge=1, description="Teacher conv layer giving the hint.")
    guided_index: Optional[int] = Field(default=None, ge=1, description="Student conv layer guided by the hint.")
    tau_squared: bool = Field(
        default=False,
        description="Scale the soft term and its gradient by tau**2 (off: the objective is used literally).",
    )

    @model_validator(mode="after")
    def _check_schedule(self) -> "DistillConfig":
        if self.lambda_init < self.lambda_final:
            raise ValueError(
                f"lambda_init ({self.lambda_init}) must be >= lambda_final ({self.lambda_final})"
            )
        return self


def lambda_at_epoch(config: DistillConfig, epoch: int) -> float:
    """Soft-term weight for ``epoch``: linear from lambda_init to lambda_final."""
    if epoch < 0:
        raise DistillError(f"epoch must be non-negative, got {epoch}")
    if epoch >= config.anneal_epochs:
        return config.lambda_final
    fraction = epoch / config.anneal_epochs
    return config.lambda_init + (config.lambda_final - config.lambda_init) * fraction


def _check_logits(logits: Tensor) -> None:
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (batch, classes), got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise DistillError("logits contain non-finite values")


def _log_softmax(z: Tensor) -> Tensor:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softened_softmax(logits: Tensor, tau: float = 1.0) -> Tensor:
    """Row-wise ``softmax(logits / tau)``."""
    if tau <= 0:
        raise DistillError(f"tau must be positive, got {tau}")
    _check_logits(logits)
    z = logits / tau
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax(logits: Tensor) -> Tensor:
    return softened_softmax(logits, 1.0)


def check_one_hot(y: Tensor, classes: int) -> None:
    if y.ndim != 2 or y.shape[1] != classes:
        raise DistillError(f"targets must be (batch, {classes}) one-hot rows, got {y.shape}")
    if not (np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=1) == 1)):
        raise DistillError("targets are not one-hot")


def one_hot(labels: np.ndarray, classes: int, dtype: type = np.float64) -> Tensor:
    y = np.zeros((labels.shape[0], classes), dtype=dtype)
    y[np.arange(labels.shape[0]), labels] = 1
    return y


def cross_entropy(y_true: Tensor, logits: Tensor) -> tuple[float, Tensor]:
    """Mean ``H(y_true, softmax(logits))`` and its gradient w.r.t. ``logits``."""
    _check_logits(logits)
    check_one_hot(y_true, logits.shape[1])
    b = logits.shape[0]
    loss = float(-(y_true * _log_softmax(logits)).sum() / b)
    grad = (softmax(logits) - y_true) / b
    return loss, grad


def kd_loss(
    y_true: Tensor,
    student_logits: Tensor,
    teacher_logits: Tensor,
    tau: float,
    lam: float,
    *,
    tau_squared: bool = False,
) -> tuple[float, Tensor]:
    """Hard-label cross-entropy plus ``lam`` times the softened teacher/student one.

    ``H(y, P_S) + lam * H(P_T^tau, P_S^tau)``, averaged over the batch. The
    gradient of the soft term carries the chain-rule factor ``1/tau``; with
    ``tau_squared`` the soft term and its gradient are multiplied by ``tau**2``.
    """
    if lam < 0:
        raise DistillError(f"lambda must be non-negative, got {lam}")
    if student_logits.shape != teacher_logits.shape:
        raise ShapeError(
            f"student logits {student_logits.shape} and teacher logits "
            f"{teacher_logits.shape} differ"
        )
    loss, grad = cross_entropy(y_true, student_logits)
    if lam == 0:
        return loss, grad
    _check_logits(teacher_logits)
    b = student_logits.shape[0]
    p_teacher = softened_softmax(teacher_logits, tau)
    log_p_student = _log_softmax(student_logits / tau)
    soft = float(-(p_teacher * log_p_student).sum() / b)
    soft_grad = (np.exp(log_p_student) - p_teacher) / (tau * b)
    if tau_squared:
        soft, soft_grad = soft * tau**2, soft_grad * tau**2
    return loss + lam * soft, grad + lam * soft_grad


def half_squared_error(target: Tensor, prediction: Tensor) -> tuple[float, Tensor]:
    """Mean over the batch of ``0.5 * ||target - prediction||^2``; grad w.r.t. prediction."""
    if target.shape != prediction.shape:
        raise ShapeError(
            f"hint shape {target.shape} differs from regressed shape {prediction.shape}"
        )
    b = target.shape[0]
    diff = prediction - target
    return float(0.5 * np.sum(diff * diff) / b), diff / b


def regressor_kernel_shape(
    guided_spatial: tuple[int, int], hint_spatial: tuple[int, int]
) -> tuple[int, int]:
    """Kernel ``k`` with ``N_g - k + 1 == N_h`` on both axes."""
    kernel = []
    for n_g, n_h in zip(guided_spatial, hint_spatial):
        if n_g < n_h:
            raise DistillError(
                f"guided spatial size {tuple(guided_spatial)} is smaller than hint "
                f"spatial size {tuple(hint_spatial)}; a convolutional regressor can only shrink"
            )
        kernel.append(n_g - n_h + 1)
    return kernel[0], kernel[1]


def regressor_param_count(
    kind: Literal["fully-connected", "convolutional"],
    n_h: tuple[int, int],
    o_h: int,
    n_g: tuple[int, int],
    o_g: int,
    k: Optional[tuple[int, int]] = None,
) -> int:
    """Weights (biases excluded) of a regressor from guided to hint shape."""
    if kind == "fully-connected":
        return n_h[0] * n_h[1] * o_h * n_g[0] * n_g[1] * o_g
    if kind == "convolutional":
        if k is None:
            k = regressor_kernel_shape(n_g, n_h)
        return k[0] * k[1] * o_h * o_g
    raise DistillError(f"unknown regressor kind {kind!r}")


def _nonlinearity_op(spec: HintNonlinearity) -> Optional[DiffOp]:
    if spec is None:
        return None
    if isinstance(spec, MaxoutSpec):
        return Maxout(spec.pieces)
    if isinstance(spec, ReLUSpec):
        return ReLU()
    if isinstance(spec, SigmoidSpec):
        return Sigmoid()
    raise DistillError(f"unsupported hint nonlinearity {spec!r}")


class Regressor:
    """Unpadded convolution from the guided layer to the hint shape.

    The convolution is followed by the hint layer's own nonlinearity. For a
    maxout hint it produces ``O_h * pieces`` channels before the maxout.
    """

    WEIGHT = "regressor.weight"
    BIAS = "regressor.bias"

    def __init__(
        self,
        hint_shape: tuple[int, int, int],
        guided_shape: tuple[int, int, int],
        nonlinearity: HintNonlinearity,
        params: dict[str, Tensor],
    ) -> None:
        self.hint_shape = tuple(hint_shape)
        self.guided_shape = tuple(guided_shape)
        self.nonlinearity = nonlinearity
        self.kernel = regressor_kernel_shape(guided_shape[1:], hint_shape[1:])
        pieces = nonlinearity.pieces if isinstance(nonlinearity, MaxoutSpec) else 1
        expected = (hint_shape[0] * pieces, guided_shape[0], *self.kernel)
        weight, bias = params[self.WEIGHT], params[self.BIAS]
        if weight.shape != expected or bias.shape != (expected[0],):
            raise ShapeError(
                f"regressor weights {weight.shape} / bias {bias.shape} cannot map guided "
                f"{self.guided_shape} to hint {self.hint_shape} (need weights {expected})"
            )
        self.params = params
        self._conv = Conv2d(pad=False)
        self._act = _nonlinearity_op(nonlinearity)

    @property
    def kind(self) -> str:
        return "convolutional"

    @property
    def size(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, guided: Tensor, params: Optional[dict[str, Tensor]] = None) -> Tensor:
        p = self.params if params is None else params
        out = self._conv.forward(guided, p[self.WEIGHT], p[self.BIAS])
        if self._act is not None:
            out = self._act.forward(out)
        if out.shape[1:] != self.hint_shape:
            raise ShapeError(
                f"regressor produced {out.shape[1:]}, hint shape is {self.hint_shape}"
            )
        return out

    def tie_margin(self) -> float:
        return self._act.tie_margin() if self._act is not None else float("inf")

    def backward(self, grad_out: Tensor) -> tuple[Tensor, dict[str, Tensor]]:
        if self._act is not None:
            (grad_out,) = self._act.backward(grad_out)
        grad_guided, grad_w, grad_b = self._conv.backward(grad_out)
        return grad_guided, {self.WEIGHT: grad_w, self.BIAS: grad_b}


def build_regressor(
    hint_shape: tuple[int, int, int],
    guided_shape: tuple[int, int, int],
    hint_nonlinearity: HintNonlinearity,
    *,
    halfwidth: float = 0.005,
    seed: int = 0,
) -> Regressor:
    """Convolutional regressor sized by ``regressor_kernel_shape``, U(-a, a) init."""
    k1, k2 = regressor_kernel_shape(guided_shape[1:], hint_shape[1:])
    pieces = hint_nonlinearity.pieces if isinstance(hint_nonlinearity, MaxoutSpec) else 1
    out_channels = hint_shape[0] * pieces
    rng = np.random.default_rng(seed)
    params = {
        Regressor.WEIGHT: uniform_init(rng, (out_channels, guided_shape[0], k1, k2), halfwidth),
        Regressor.BIAS: uniform_init(rng, (out_channels,), halfwidth),
    }
    regressor = Regressor(hint_shape, guided_shape, hint_nonlinearity, params)
    logger.debug(
        "regressor_built",
        kernel=(k1, k2),
        in_channels=guided_shape[0],
        out_channels=out_channels,
        params=regressor.size,
    )
    return regressor


def hint_loss(
    teacher_hint: Tensor,
    student_guided: Tensor,
    regressor: Regressor,
    params: Optional[dict[str, Tensor]] = None,
) -> tuple[float, Tensor, dict[str, Tensor]]:
    """Half squared distance between the hint and the regressed guided output.

    Returns the loss, its gradient w.r.t. the guided output and w.r.t. the
    regressor parameters. The teacher side is a constant.
    """
    prediction = regressor.forward(student_guided, params)
    if prediction.shape != teacher_hint.shape:
        raise ShapeError(
            f"regressed shape {prediction.shape} differs from hint shape {teacher_hint.shape}"
        )
    loss, grad = half_squared_error(teacher_hint, prediction)
    grad_guided, grad_params = regressor.backward(grad)
    return loss, grad_guided, grad_params
