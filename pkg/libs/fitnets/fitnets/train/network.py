"""Executable network compiled from an ``ArchitectureSpec``."""

from __future__ import annotations

import math
from collections.abc import Mapping
from typing import Optional

import numpy as np

from fitnets.errors import ArchitectureError, OpStateError, ShapeError
from fitnets.netarch.types import (
    ArchitectureSpec,
    ConvSpec,
    FullyConnectedSpec,
    GlobalMaxPoolSpec,
    LayerSpec,
    MaxoutSpec,
    MaxPoolSpec,
    ReLUSpec,
    SigmoidHead,
    SigmoidSpec,
    SoftmaxHead,
)
from fitnets.tensor.ops import (
    Conv2d,
    DiffOp,
    FullyConnected,
    GlobalMaxPool,
    Maxout,
    MaxPool2d,
    ReLU,
    Sigmoid,
    Tensor,
)
from fitnets.train.params import layer_param_names


class BinaryLogits(DiffOp):
    """Turn one logit ``a`` per example into the two-class logits ``[0, a]``.

    ``softmax([0, a])[1] == sigmoid(a)``, so a one-unit logistic head shares the
    softmax losses and argmax evaluation.
    """

    kind = "binary_logits"

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != 1:
            raise ShapeError(f"binary_logits expects (batch, 1), got {x.shape}")
        self._cache = {}
        return np.concatenate([np.zeros_like(x), x], axis=1)

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        self._cached()
        return (np.ascontiguousarray(grad_out[:, 1:2]),)


def _ops_for(layer: LayerSpec) -> list[DiffOp]:
    if isinstance(layer, ConvSpec):
        return [Conv2d(pad=layer.padded)]
    if isinstance(layer, MaxPoolSpec):
        return [MaxPool2d((layer.wh, layer.ww), (layer.oh, layer.ow))]
    if isinstance(layer, GlobalMaxPoolSpec):
        return [GlobalMaxPool()]
    if isinstance(layer, MaxoutSpec):
        return [Maxout(layer.pieces)]
    if isinstance(layer, ReLUSpec):
        return [ReLU()]
    if isinstance(layer, SigmoidSpec):
        return [Sigmoid()]
    if isinstance(layer, FullyConnectedSpec):
        return [FullyConnected()] + ([Maxout(layer.pieces)] if layer.pieces > 1 else [])
    if isinstance(layer, SoftmaxHead):
        return [FullyConnected()]
    if isinstance(layer, SigmoidHead):
        return [FullyConnected(), BinaryLogits()]
    raise ArchitectureError(f"unknown layer {layer!r}")


class _Layer:
    __slots__ = ("index", "spec", "ops", "param_names")

    def __init__(self, index: int, spec: LayerSpec, param_names: tuple[str, ...]) -> None:
        self.index = index
        self.spec = spec
        self.ops = _ops_for(spec)
        self.param_names = param_names

    def forward(self, x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
        first, *rest = self.ops
        x = first.forward(x, *(params[name] for name in self.param_names))
        for op in rest:
            x = op.forward(x)
        return x

    def backward(self, grad: Tensor) -> tuple[Tensor, dict[str, Tensor]]:
        first, *rest = self.ops
        for op in reversed(rest):
            (grad,) = op.backward(grad)
        grad_input, *grad_params = first.backward(grad)
        return grad_input, dict(zip(self.param_names, grad_params))


class Network:
    """Forward and backward passes over a layer sequence.

    A network instance holds the caches of its last forward pass, so teacher
    and student each need their own instance.

        net = Network(arch)
        logits = net.forward(x, params)
        grad_x, grads = net.backward(grad_logits)
    """

    def __init__(self, arch: ArchitectureSpec) -> None:
        self.arch = arch
        names = layer_param_names(arch)
        self._layers = [
            _Layer(i, layer, names.get(i, ())) for i, layer in enumerate(arch.layers)
        ]
        self._last: Optional[int] = None

    def __repr__(self) -> str:
        return f"Network({self.arch.name!r}, {len(self._layers)} layers)"

    def forward(
        self, x: Tensor, params: Mapping[str, Tensor], *, until: Optional[int] = None
    ) -> Tensor:
        """Run layers ``0..until`` (inclusive; default: all, giving logits)."""
        if tuple(x.shape[1:]) != tuple(self.arch.input_shape):
            raise ShapeError(
                f"{self.arch.name}: input {x.shape} does not match (batch, "
                f"{', '.join(map(str, self.arch.input_shape))})"
            )
        last = len(self._layers) - 1 if until is None else until
        for layer in self._layers[: last + 1]:
            x = layer.forward(x, params)
        self._last = last
        return x

    def backward(self, grad: Tensor) -> tuple[Tensor, dict[str, Tensor]]:
        """Backpropagate from the output of the last forward pass."""
        if self._last is None:
            raise OpStateError(f"{self.arch.name}: backward called before forward")
        grads: dict[str, Tensor] = {}
        for layer in reversed(self._layers[: self._last + 1]):
            grad, layer_grads = layer.backward(grad)
            grads.update(layer_grads)
        return grad, grads

    def tie_margin(self) -> float:
        """Smallest distance of the last forward pass from a max tie or ReLU kink."""
        if self._last is None:
            raise OpStateError(f"{self.arch.name}: tie_margin called before forward")
        return min(
            (op.tie_margin() for layer in self._layers[: self._last + 1] for op in layer.ops),
            default=math.inf,
        )

    def param_names_until(self, boundary: int) -> list[str]:
        """Parameter names of layers ``0..boundary``, in declaration order."""
        return [name for layer in self._layers[: boundary + 1] for name in layer.param_names]

    def forward_batched(
        self,
        x: Tensor,
        params: Mapping[str, Tensor],
        *,
        until: Optional[int] = None,
        batch_size: int = 256,
    ) -> Tensor:
        """Forward in chunks; for evaluation, where no backward follows."""
        if x.shape[0] == 0:
            raise ShapeError(f"{self.arch.name}: empty input")
        return np.concatenate(
            [
                self.forward(x[i : i + batch_size], params, until=until)
                for i in range(0, x.shape[0], batch_size)
            ]
        )

    def predict(self, x: Tensor, params: Mapping[str, Tensor], *, batch_size: int = 256) -> np.ndarray:
        """Predicted class per example; ties go to the lowest class index."""
        return np.argmax(self.forward_batched(x, params, batch_size=batch_size), axis=1)
