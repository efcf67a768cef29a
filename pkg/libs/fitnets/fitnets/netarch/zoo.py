"""Builders for the named teacher and FitNet architectures.

FitNets stack zero-padded 3x3 maxout (2 pieces) convolutions in three stages,
with a 2x2 max-pooling between stages and a global max-pooling after the last
stage, then a maxout fully-connected layer and a softmax head. Channel counts
below are the number of maxout units; the conv layers are declared with twice as
many output channels.
"""

from __future__ import annotations

from typing import Callable, Optional

from fitnets.errors import ArchitectureError
from fitnets.netarch.types import (
    ArchitectureSpec,
    ConvSpec,
    FullyConnectedSpec,
    GlobalMaxPoolSpec,
    HintPair,
    LayerSpec,
    MaxoutSpec,
    MaxPoolSpec,
    ReLUSpec,
    SigmoidHead,
    SoftmaxHead,
)

MAXOUT_PIECES = 2
CIFAR_INPUT = (3, 32, 32)
MNIST_INPUT = (1, 28, 28)
AFLW_INPUT = (3, 16, 16)
DESK_INPUT = (1, 14, 14)


def _maxout_conv(k: int, units: int, *, padded: bool = True) -> list[LayerSpec]:
    return [ConvSpec(k, k, units * MAXOUT_PIECES, padded), MaxoutSpec(MAXOUT_PIECES)]


def fitnet(
    name: str,
    stages: list[list[int]],
    hint: tuple[int, int],
    *,
    fc_units: int = 500,
    fc_pieces: int = 2,
    classes: int = 10,
    input_shape: tuple[int, int, int] = CIFAR_INPUT,
) -> ArchitectureSpec:
    layers: list[LayerSpec] = []
    for i, stage in enumerate(stages):
        for units in stage:
            layers.extend(_maxout_conv(3, units))
        layers.append(GlobalMaxPoolSpec() if i == len(stages) - 1 else MaxPoolSpec(2, 2))
    layers.append(FullyConnectedSpec(fc_units, fc_pieces))
    layers.append(SoftmaxHead(classes))
    return ArchitectureSpec(name, input_shape, tuple(layers), HintPair(*hint))


def _mnist_teacher(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
    layers = [
        *_maxout_conv(5, 48, padded=False),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(5, 48),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(3, 24),
        MaxPoolSpec(2, 2),
        SoftmaxHead(classes),
    ]
    return ArchitectureSpec("mnist-teacher", input_shape, tuple(layers))


def _mnist_student(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
    layers = [
        *_maxout_conv(3, 16),
        *_maxout_conv(3, 16),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(3, 16),
        *_maxout_conv(3, 16),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(3, 12),
        *_maxout_conv(3, 12),
        MaxPoolSpec(2, 2),
        SoftmaxHead(classes),
    ]
    return ArchitectureSpec("mnist-student", input_shape, tuple(layers), HintPair(4, 2))


def _aflw_teacher(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
    layers = [
        ConvSpec(3, 3, 128),
        ReLUSpec(),
        MaxPoolSpec(2, 2),
        ConvSpec(2, 2, 512),
        ReLUSpec(),
        ConvSpec(5, 5, 512),
        ReLUSpec(),
        SigmoidHead(1),
    ]
    return ArchitectureSpec("aflw-teacher", input_shape, tuple(layers))


def _aflw_fitnet(name: str, channels: list[int]) -> Callable[..., ArchitectureSpec]:
    def build(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
        layers: list[LayerSpec] = []
        for c in channels:
            layers.extend([ConvSpec(3, 3, c), ReLUSpec()])
        layers.append(SigmoidHead(1))
        return ArchitectureSpec(name, input_shape, tuple(layers), HintPair(5, 3))

    return build


def _desk_teacher(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
    layers = [
        *_maxout_conv(5, 16),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(5, 32),
        MaxPoolSpec(4, 4, 2, 2),
        *_maxout_conv(3, 32),
        GlobalMaxPoolSpec(),
        FullyConnectedSpec(64, 2),
        SoftmaxHead(classes),
    ]
    return ArchitectureSpec("desk-teacher", input_shape, tuple(layers))


def _desk_student(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
    return fitnet(
        "desk-student",
        [[4, 4, 4], [16, 16, 16], [16, 16, 16]],
        (6, 2),
        fc_units=32,
        fc_pieces=2,
        classes=classes,
        input_shape=input_shape,
    )


def _table(name: str, stages: list[list[int]], hint: tuple[int, int]) -> Callable[..., ArchitectureSpec]:
    def build(input_shape: tuple[int, int, int], classes: int) -> ArchitectureSpec:
        return fitnet(name, stages, hint, classes=classes, input_shape=input_shape)

    return build


_BUILDERS: dict[str, tuple[Callable[..., ArchitectureSpec], tuple[int, int, int]]] = {
    # Depth study at a fixed multiplication budget.
    "fitnet-5-layer-30m": (_table("fitnet-5-layer-30m", [[64], [64], [64]], (2, 2)), CIFAR_INPUT),
    "fitnet-5-layer-107m": (_table("fitnet-5-layer-107m", [[128], [128], [128]], (2, 2)), CIFAR_INPUT),
    "fitnet-7-layer-30m": (_table("fitnet-7-layer-30m", [[16, 32], [32, 64], [64]], (4, 2)), CIFAR_INPUT),
    "fitnet-7-layer-107m": (_table("fitnet-7-layer-107m", [[32, 64], [80, 80], [128]], (4, 2)), CIFAR_INPUT),
    "fitnet-9-layer-30m": (
        _table("fitnet-9-layer-30m", [[16, 32], [32, 32, 32], [48, 64]], (5, 2)),
        CIFAR_INPUT,
    ),
    "fitnet-9-layer-107m": (
        _table("fitnet-9-layer-107m", [[32, 32], [64, 80, 80], [96, 128]], (5, 2)),
        CIFAR_INPUT,
    ),
    "fitnet-11-layer-30m": (
        _table("fitnet-11-layer-30m", [[16, 16, 16], [32, 32, 32], [48, 48, 64]], (7, 2)),
        CIFAR_INPUT,
    ),
    "fitnet-11-layer-107m": (
        _table("fitnet-11-layer-107m", [[16, 32, 32], [48, 64, 80], [96, 96, 128]], (7, 2)),
        CIFAR_INPUT,
    ),
    # Performance/efficiency trade-off.
    "fitnet1": (_table("fitnet1", [[16, 16, 16], [32, 32, 32], [48, 48, 64]], (6, 2)), CIFAR_INPUT),
    "fitnet2": (_table("fitnet2", [[16, 32, 32], [48, 64, 80], [96, 96, 128]], (6, 2)), CIFAR_INPUT),
    "fitnet3": (
        _table("fitnet3", [[32, 48, 64, 64], [80, 80, 80, 80], [128, 128, 128]], (8, 2)),
        CIFAR_INPUT,
    ),
    "fitnet4": (
        _table("fitnet4", [[32, 32, 32, 48, 48], [80] * 6, [128] * 6], (11, 2)),
        CIFAR_INPUT,
    ),
    "mnist-teacher": (_mnist_teacher, MNIST_INPUT),
    "mnist-student": (_mnist_student, MNIST_INPUT),
    "aflw-teacher": (_aflw_teacher, AFLW_INPUT),
    "aflw-fitnet1": (_aflw_fitnet("aflw-fitnet1", [16, 32, 32, 32, 32, 32, 32]), AFLW_INPUT),
    "aflw-fitnet2": (_aflw_fitnet("aflw-fitnet2", [32, 64, 64, 64, 64, 64, 64]), AFLW_INPUT),
    "desk-teacher": (_desk_teacher, DESK_INPUT),
    "desk-student": (_desk_student, DESK_INPUT),
}

NAMED_ARCHITECTURES = tuple(_BUILDERS)


def build_named_arch(
    name: str,
    *,
    input_shape: Optional[tuple[int, int, int]] = None,
    classes: int = 10,
) -> ArchitectureSpec:
    """Build a named architecture, with its declared (guided, hint) pair if any.

    Args:
        name: One of ``NAMED_ARCHITECTURES``.
        input_shape: Overrides the dataset input shape the table assumes.
        classes: Softmax width. Ignored by sigmoid-head (binary) networks.
    """
    if name not in _BUILDERS:
        raise ArchitectureError(
            f"unknown architecture {name!r}; known: {', '.join(NAMED_ARCHITECTURES)}"
        )
    builder, default_input = _BUILDERS[name]
    return builder(tuple(input_shape or default_input), classes)


def resolve_architecture(
    ref: str,
    *,
    input_shape: Optional[tuple[int, int, int]] = None,
    classes: int = 10,
) -> ArchitectureSpec:
    """Build ``ref`` if it names a known architecture, else load it as a file."""
    if ref in _BUILDERS:
        return build_named_arch(ref, input_shape=input_shape, classes=classes)
    from fitnets.netarch.dsl import load_architecture

    arch = load_architecture(ref)
    return arch.with_input_shape(input_shape) if input_shape else arch
