"""RMSProp and momentum SGD over named parameters."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Literal, MutableMapping, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from fitnets.errors import DivergenceError, ShapeError
from fitnets.tensor.ops import Tensor


class OptimizerConfig(BaseModel):
    kind: Literal["rmsprop", "sgd-momentum"] = "rmsprop"
    learning_rate: float = Field(default=0.005, gt=0)
    learning_rate_final: Optional[float] = Field(
        default=None,
        gt=0,
        description="When set, the rate moves linearly to this value over lr_schedule_epochs.",
    )
    lr_schedule_epochs: int = Field(default=100, ge=1)
    rho: float = Field(default=0.9, ge=0, lt=1, description="RMSProp decay.")
    epsilon: float = Field(default=1e-8, gt=0)
    momentum_initial: float = Field(default=0.1, ge=0, lt=1)
    momentum_final: float = Field(default=0.9, ge=0, lt=1)
    momentum_epochs: int = Field(default=100, ge=1, description="Epoch at which momentum saturates.")
    batch_size: int = Field(default=128, ge=1)

    @model_validator(mode="after")
    def _check_momentum(self) -> "OptimizerConfig":
        if self.kind == "sgd-momentum" and self.momentum_final < self.momentum_initial:
            raise ValueError("momentum_final must be >= momentum_initial")
        return self


def _linear(start: float, end: float, epoch: int, epochs: int) -> float:
    if epoch >= epochs:
        return end
    return start + (end - start) * (epoch / epochs)


def learning_rate_at(config: OptimizerConfig, epoch: int) -> float:
    if config.learning_rate_final is None:
        return config.learning_rate
    return _linear(config.learning_rate, config.learning_rate_final, epoch, config.lr_schedule_epochs)


def momentum_at(config: OptimizerConfig, epoch: int) -> float:
    return _linear(config.momentum_initial, config.momentum_final, epoch, config.momentum_epochs)


def _check_grads(
    params: Mapping[str, Tensor], grads: Mapping[str, Tensor]
) -> None:
    for name, grad in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if grad.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient {grad.shape} does not match parameter {params[name].shape}")
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite gradient for {name}")


def rmsprop_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    state: MutableMapping[str, Tensor],
    config: OptimizerConfig,
    *,
    learning_rate: Optional[float] = None,
) -> None:
    """In place: ``acc = rho*acc + (1-rho)*g**2``; ``p -= lr*g/sqrt(acc + eps)``.

    Only parameters present in ``grads`` move.
    """
    _check_grads(params, grads)
    lr = config.learning_rate if learning_rate is None else learning_rate
    rho = config.rho
    for name, grad in grads.items():
        acc = state.get(name)
        if acc is None:
            acc = state[name] = np.zeros_like(grad)
        acc *= rho
        acc += (1.0 - rho) * grad * grad
        param = params[name]
        param -= lr * grad / np.sqrt(acc + config.epsilon)


def momentum_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    state: MutableMapping[str, Tensor],
    config: OptimizerConfig,
    *,
    learning_rate: float,
    momentum: float,
) -> None:
    """In place classical momentum: ``v = mu*v - lr*g``; ``p += v``."""
    _check_grads(params, grads)
    for name, grad in grads.items():
        velocity = state.get(name)
        if velocity is None:
            velocity = state[name] = np.zeros_like(grad)
        velocity *= momentum
        velocity -= learning_rate * grad
        param = params[name]
        param += velocity


class Optimizer:
    """Optimizer state for one training run."""

    def __init__(self, config: OptimizerConfig) -> None:
        self.config = config
        self.state: dict[str, Tensor] = {}

    def step(
        self,
        params: Mapping[str, Tensor],
        grads: Mapping[str, Tensor],
        epoch: int,
    ) -> None:
        lr = learning_rate_at(self.config, epoch)
        if self.config.kind == "rmsprop":
            rmsprop_step(params, grads, self.state, self.config, learning_rate=lr)
        else:
            momentum_step(
                params,
                grads,
                self.state,
                self.config,
                learning_rate=lr,
                momentum=momentum_at(self.config, epoch),
            )
