"""Named parameter tensors of a network.

Parameters are named after the layer that owns them, in declaration order:
``conv{k}.weight`` / ``conv{k}.bias`` for conv layer k (1-based),
``fc{j}.weight`` / ``fc{j}.bias`` for fully-connected layers and
``head.weight`` / ``head.bias`` for the output layer. Regressor parameters use
the ``regressor.`` prefix.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from typing import Iterable, Optional

import numpy as np

from fitnets.errors import ShapeError
from fitnets.netarch.counting import infer_shapes
from fitnets.netarch.types import (
    ArchitectureSpec,
    ConvSpec,
    FullyConnectedSpec,
    SigmoidHead,
    SoftmaxHead,
)
from fitnets.tensor.ops import Tensor, uniform_init


def layer_param_names(arch: ArchitectureSpec) -> dict[int, tuple[str, str]]:
    """(weight, bias) names keyed by layer index, for layers that own parameters."""
    names: dict[int, tuple[str, str]] = {}
    conv = fc = 0
    for index, layer in enumerate(arch.layers):
        if isinstance(layer, ConvSpec):
            conv += 1
            prefix = f"conv{conv}"
        elif isinstance(layer, FullyConnectedSpec):
            fc += 1
            prefix = f"fc{fc}"
        elif isinstance(layer, (SoftmaxHead, SigmoidHead)):
            prefix = "head"
        else:
            continue
        names[index] = (f"{prefix}.weight", f"{prefix}.bias")
    return names


def param_shapes(arch: ArchitectureSpec) -> dict[str, tuple[int, ...]]:
    """Shape of every parameter tensor, in declaration order."""
    trace = infer_shapes(arch)
    shapes: dict[str, tuple[int, ...]] = {}
    for index, (weight, bias) in layer_param_names(arch).items():
        layer = arch.layers[index]
        in_shape = trace.layers[index].input_shape
        if isinstance(layer, ConvSpec):
            w_shape: tuple[int, ...] = (layer.out_channels, in_shape[0], layer.kh, layer.kw)
        else:
            fan_in = int(np.prod(in_shape))
            if isinstance(layer, FullyConnectedSpec):
                out = layer.units * layer.pieces
            elif isinstance(layer, SoftmaxHead):
                out = layer.classes
            else:
                out = layer.units
            w_shape = (out, fan_in)
        shapes[weight] = w_shape
        shapes[bias] = (w_shape[0],)
    return shapes


class ParameterSet(Mapping[str, Tensor]):
    """Ordered, named parameter tensors."""

    def __init__(self, tensors: Optional[Mapping[str, Tensor]] = None) -> None:
        self._tensors: dict[str, Tensor] = dict(tensors or {})

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self) -> str:
        return f"ParameterSet({len(self)} tensors, {self.size} scalars)"

    @property
    def size(self) -> int:
        """Total number of scalars."""
        return sum(t.size for t in self._tensors.values())

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: v.copy() for k, v in self._tensors.items()})

    def subset(self, names: Iterable[str]) -> "ParameterSet":
        """Copies of the named tensors, in this set's order."""
        wanted = set(names)
        missing = wanted - self._tensors.keys()
        if missing:
            raise KeyError(f"unknown parameters: {sorted(missing)}")
        return ParameterSet({k: v.copy() for k, v in self._tensors.items() if k in wanted})

    def merged(self, other: Mapping[str, Tensor]) -> "ParameterSet":
        """A new set holding this set's tensors followed by ``other``'s."""
        clash = self._tensors.keys() & other.keys()
        if clash:
            raise KeyError(f"duplicate parameter names: {sorted(clash)}")
        return ParameterSet({**self._tensors, **other})

    def update_from(self, other: Mapping[str, Tensor]) -> None:
        """Overwrite matching tensors with copies from ``other``."""
        for name, value in other.items():
            if name not in self._tensors:
                continue
            if value.shape != self._tensors[name].shape:
                raise ShapeError(
                    f"{name}: cannot copy {value.shape} into {self._tensors[name].shape}"
                )
            self._tensors[name] = value.copy()

    def equals(self, other: Mapping[str, Tensor], names: Optional[Iterable[str]] = None) -> bool:
        """Bitwise equality on ``names`` (default: all of this set's names)."""
        for name in self._tensors if names is None else names:
            if name not in other:
                return False
            a, b = self._tensors[name], other[name]
            if a.shape != b.shape or a.dtype != b.dtype or a.tobytes() != b.tobytes():
                return False
        return True

    def check_shapes(self, arch: ArchitectureSpec) -> None:
        expected = param_shapes(arch)
        if list(expected) != list(self._tensors):
            raise ShapeError(
                f"{arch.name}: parameter names {list(self._tensors)} do not match {list(expected)}"
            )
        for name, shape in expected.items():
            if self._tensors[name].shape != shape:
                raise ShapeError(
                    f"{arch.name}: {name} has shape {self._tensors[name].shape}, expected {shape}"
                )


def init_params(arch: ArchitectureSpec, halfwidth: float = 0.005, seed: int = 0) -> ParameterSet:
    """Draw every weight and bias from U(-halfwidth, halfwidth), in declaration order."""
    rng = np.random.default_rng(seed)
    return ParameterSet(
        {name: uniform_init(rng, shape, halfwidth) for name, shape in param_shapes(arch).items()}
    )


def derive_seed(seed: int, *keys: int) -> int:
    """A 32-bit seed for an independent stream identified by ``keys``."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])
