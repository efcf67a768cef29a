"""Layer and architecture descriptions.

An architecture is an input shape plus an ordered list of layer specs. Maxout
convolutions are written as two entries, a ``ConvSpec`` whose ``out_channels``
already counts every piece followed by a ``MaxoutSpec``. A fully-connected
layer carries its own piece count and applies maxout itself when ``pieces > 1``.

Convolutional layers are numbered 1..n in order. The output of "conv layer k"
is taken after its nonlinearity and any pooling attached to it, i.e. just before
the next convolution, fully-connected layer or head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

from fitnets.errors import ArchitectureError


def _positive(owner: str, **values: int) -> None:
    for name, value in values.items():
        if not isinstance(value, int) or value < 1:
            raise ArchitectureError(f"{owner}: {name} must be a positive integer, got {value!r}")


@dataclass(frozen=True, slots=True)
class ConvSpec:
    kh: int
    kw: int
    out_channels: int
    padded: bool = False

    def __post_init__(self) -> None:
        _positive("conv", kh=self.kh, kw=self.kw, out_channels=self.out_channels)


@dataclass(frozen=True, slots=True)
class MaxPoolSpec:
    wh: int
    ww: int
    oh: int = 0
    ow: int = 0

    def __post_init__(self) -> None:
        _positive("pool", wh=self.wh, ww=self.ww)
        if not (0 <= self.oh < self.wh and 0 <= self.ow < self.ww):
            raise ArchitectureError(
                f"pool: overlap {self.oh}x{self.ow} must be smaller than window {self.wh}x{self.ww}"
            )


@dataclass(frozen=True, slots=True)
class GlobalMaxPoolSpec:
    pass


@dataclass(frozen=True, slots=True)
class MaxoutSpec:
    pieces: int

    def __post_init__(self) -> None:
        _positive("maxout", pieces=self.pieces)


@dataclass(frozen=True, slots=True)
class FullyConnectedSpec:
    units: int
    pieces: int = 1

    def __post_init__(self) -> None:
        _positive("fc", units=self.units, pieces=self.pieces)


@dataclass(frozen=True, slots=True)
class ReLUSpec:
    pass


@dataclass(frozen=True, slots=True)
class SigmoidSpec:
    pass


@dataclass(frozen=True, slots=True)
class SoftmaxHead:
    classes: int

    def __post_init__(self) -> None:
        _positive("softmax", classes=self.classes)


@dataclass(frozen=True, slots=True)
class SigmoidHead:
    """One logistic output unit for binary problems (two classes)."""

    units: int = 1

    def __post_init__(self) -> None:
        if self.units != 1:
            raise ArchitectureError(f"sigmoid head supports a single unit, got {self.units}")


LayerSpec = Union[
    ConvSpec,
    MaxPoolSpec,
    GlobalMaxPoolSpec,
    MaxoutSpec,
    FullyConnectedSpec,
    ReLUSpec,
    SigmoidSpec,
    SoftmaxHead,
    SigmoidHead,
]

HEADS = (SoftmaxHead, SigmoidHead)
NONLINEARITIES = (MaxoutSpec, ReLUSpec, SigmoidSpec)
# Layers that stay attached to the convolution before them.
_ATTACHED = (MaxoutSpec, ReLUSpec, SigmoidSpec, MaxPoolSpec, GlobalMaxPoolSpec)


class HintPair(NamedTuple):
    """Conv layer indices used for hint training, as written "guided <- hint"."""

    guided: int
    """Student (FitNet) conv layer trained to predict the hint."""
    hint: int
    """Teacher conv layer whose output is the hint."""


@dataclass(frozen=True, slots=True)
class ArchitectureSpec:
    name: str
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    hint: Optional[HintPair] = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3:
            raise ArchitectureError(f"{self.name}: input shape must be (C, H, W), got {self.input_shape}")
        c, h, w = self.input_shape
        _positive(f"{self.name} input", channels=c, height=h, width=w)
        heads = [i for i, layer in enumerate(self.layers) if isinstance(layer, HEADS)]
        if len(heads) != 1 or heads[0] != len(self.layers) - 1:
            raise ArchitectureError(
                f"{self.name}: expected exactly one head layer in last position, "
                f"found heads at {heads} of {len(self.layers)} layers"
            )
        if self.hint is not None:
            object.__setattr__(self, "hint", HintPair(*self.hint))
            if not 1 <= self.hint.guided <= self.conv_count:
                raise ArchitectureError(
                    f"{self.name}: guided layer {self.hint.guided} is not one of "
                    f"the {self.conv_count} conv layers"
                )

    @property
    def head(self) -> Union[SoftmaxHead, SigmoidHead]:
        return self.layers[-1]  # type: ignore[return-value]

    @property
    def class_count(self) -> int:
        head = self.head
        return head.classes if isinstance(head, SoftmaxHead) else 2

    @property
    def conv_positions(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if isinstance(layer, ConvSpec)]

    @property
    def conv_count(self) -> int:
        return len(self.conv_positions)

    def conv_position(self, k: int) -> int:
        positions = self.conv_positions
        if not 1 <= k <= len(positions):
            raise ArchitectureError(
                f"{self.name}: conv layer {k} out of range 1..{len(positions)}"
            )
        return positions[k - 1]

    def conv_boundary(self, k: int) -> int:
        """Index of the last layer belonging to conv layer ``k`` (1-based)."""
        q = self.conv_position(k)
        while q + 1 < len(self.layers) and isinstance(self.layers[q + 1], _ATTACHED):
            q += 1
        return q

    def conv_nonlinearity(self, k: int) -> Optional[LayerSpec]:
        """The nonlinearity applied right after conv layer ``k``, if any."""
        p = self.conv_position(k)
        if p + 1 < len(self.layers) and isinstance(self.layers[p + 1], NONLINEARITIES):
            return self.layers[p + 1]
        return None

    def with_input_shape(self, input_shape: tuple[int, int, int]) -> "ArchitectureSpec":
        return ArchitectureSpec(self.name, tuple(input_shape), self.layers, self.hint)  # type: ignore[arg-type]
