"""Shape inference, parameter and multiplication counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from typing_extensions import TypedDict

from fitnets.errors import ArchitectureError, ShapeError
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
from fitnets.tensor.ops import pool_output_extent

Shape = tuple[int, ...]


@dataclass(frozen=True, slots=True)
class LayerTrace:
    index: int
    layer: LayerSpec
    input_shape: Shape
    output_shape: Shape
    params: int
    mults: int


@dataclass(frozen=True, slots=True)
class LayerShapeTrace:
    arch_name: str
    layers: tuple[LayerTrace, ...]

    @property
    def output_shape(self) -> Shape:
        return self.layers[-1].output_shape

    @property
    def total_params(self) -> int:
        return sum(t.params for t in self.layers)

    @property
    def total_mults(self) -> int:
        return sum(t.mults for t in self.layers)

    def shape_after(self, index: int) -> Shape:
        return self.layers[index].output_shape


def _flat(shape: Shape) -> int:
    size = 1
    for extent in shape:
        size *= extent
    return size


def _trace_layer(layer: LayerSpec, shape: Shape) -> tuple[Shape, int, int]:
    """Return (output shape, parameters, multiplications) for one example."""
    if isinstance(layer, ConvSpec):
        if len(shape) != 3:
            raise ShapeError(f"conv needs a (C, H, W) input, got {shape}")
        c, h, w = shape
        if layer.padded:
            if layer.kh % 2 == 0 or layer.kw % 2 == 0:
                raise ShapeError(f"padded conv needs odd kernels, got {layer.kh}x{layer.kw}")
            oh, ow = h, w
        else:
            oh, ow = h - layer.kh + 1, w - layer.kw + 1
            if oh < 1 or ow < 1:
                raise ShapeError(f"kernel {layer.kh}x{layer.kw} does not fit {h}x{w}")
        o = layer.out_channels
        fan = layer.kh * layer.kw * c
        return (o, oh, ow), fan * o + o, oh * ow * fan * o
    if isinstance(layer, MaxPoolSpec):
        if len(shape) != 3:
            raise ShapeError(f"pool needs a (C, H, W) input, got {shape}")
        c, h, w = shape
        return (
            (c, pool_output_extent(h, layer.wh, layer.oh), pool_output_extent(w, layer.ww, layer.ow)),
            0,
            0,
        )
    if isinstance(layer, GlobalMaxPoolSpec):
        if len(shape) != 3:
            raise ShapeError(f"gpool needs a (C, H, W) input, got {shape}")
        return (shape[0], 1, 1), 0, 0
    if isinstance(layer, MaxoutSpec):
        if shape[0] % layer.pieces:
            raise ShapeError(f"maxout: {shape[0]} channels are not divisible by {layer.pieces} pieces")
        return (shape[0] // layer.pieces, *shape[1:]), 0, 0
    if isinstance(layer, (ReLUSpec, SigmoidSpec)):
        return shape, 0, 0
    if isinstance(layer, FullyConnectedSpec):
        d = _flat(shape)
        u = layer.units * layer.pieces
        return (layer.units,), d * u + u, d * u
    if isinstance(layer, (SoftmaxHead, SigmoidHead)):
        d = _flat(shape)
        k = layer.classes if isinstance(layer, SoftmaxHead) else layer.units
        return (k,), d * k + k, d * k
    raise ArchitectureError(f"unknown layer {layer!r}")


def infer_shapes(arch: ArchitectureSpec) -> LayerShapeTrace:
    """Trace shapes, parameters and multiplications layer by layer.

    Raises:
        ArchitectureError: naming the first layer whose input shape is invalid.
    """
    shape: Shape = tuple(arch.input_shape)
    traces = []
    for index, layer in enumerate(arch.layers):
        try:
            out, params, mults = _trace_layer(layer, shape)
        except ShapeError as e:
            raise ArchitectureError(
                f"{arch.name}: layer {index} ({layer}) rejects input shape {shape}: {e}"
            ) from None
        traces.append(LayerTrace(index, layer, shape, out, params, mults))
        shape = out
    return LayerShapeTrace(arch.name, tuple(traces))


def count_params(arch: ArchitectureSpec) -> int:
    return infer_shapes(arch).total_params


def count_mults(arch: ArchitectureSpec) -> int:
    """Multiplications of one forward propagation of a single example."""
    return infer_shapes(arch).total_mults


def conv_output_shape(arch: ArchitectureSpec, k: int) -> Shape:
    """Shape of conv layer ``k``'s output after its nonlinearity and pooling."""
    return infer_shapes(arch).shape_after(arch.conv_boundary(k))


class CompressionRecord(TypedDict):
    """Teacher-to-student ratios in the style of a speed-up/compression table."""

    teacher_params: int
    student_params: int
    teacher_mults: int
    student_mults: int
    compression_rate: float
    """teacher params / student params."""
    analytic_speedup: float
    """teacher mults / student mults."""
    measured_speedup: Optional[float]
    """teacher seconds / student seconds, only when timings were supplied."""


def compression_record(
    teacher_params: int,
    student_params: int,
    teacher_mults: int,
    student_mults: int,
    timing: Optional[tuple[float, float]] = None,
) -> CompressionRecord:
    measured = None
    if timing is not None:
        teacher_seconds, student_seconds = timing
        measured = teacher_seconds / student_seconds
    return {
        "teacher_params": teacher_params,
        "student_params": student_params,
        "teacher_mults": teacher_mults,
        "student_mults": student_mults,
        "compression_rate": teacher_params / student_params,
        "analytic_speedup": teacher_mults / student_mults,
        "measured_speedup": measured,
    }


def speedup_and_compression(
    teacher: ArchitectureSpec,
    student: ArchitectureSpec,
    timing: Optional[tuple[float, float]] = None,
) -> CompressionRecord:
    """Compression rate and analytic speed-up of ``student`` relative to ``teacher``.

    ``timing`` is an optional (teacher seconds, student seconds) pair of measured
    forward wall-clock; the measured ratio is reported next to the analytic one.
    """
    t, s = infer_shapes(teacher), infer_shapes(student)
    return compression_record(t.total_params, s.total_params, t.total_mults, s.total_mults, timing)


def layer_depth(arch: ArchitectureSpec) -> int:
    """Layer count as tables report it: conv, fully-connected and output layers."""
    return sum(
        isinstance(layer, (ConvSpec, FullyConnectedSpec, SoftmaxHead, SigmoidHead))
        for layer in arch.layers
    )
