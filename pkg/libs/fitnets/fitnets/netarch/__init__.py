from fitnets.netarch.counting import (
    CompressionRecord,
    LayerShapeTrace,
    LayerTrace,
    compression_record,
    conv_output_shape,
    count_mults,
    count_params,
    infer_shapes,
    layer_depth,
    speedup_and_compression,
)
from fitnets.netarch.dsl import load_architecture, parse_architecture, write_architecture
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
    SigmoidSpec,
    SoftmaxHead,
)
from fitnets.netarch.zoo import NAMED_ARCHITECTURES, build_named_arch, resolve_architecture

__all__ = [
    "ArchitectureSpec",
    "LayerSpec",
    "ConvSpec",
    "MaxPoolSpec",
    "GlobalMaxPoolSpec",
    "MaxoutSpec",
    "FullyConnectedSpec",
    "ReLUSpec",
    "SigmoidSpec",
    "SoftmaxHead",
    "SigmoidHead",
    "HintPair",
    "LayerTrace",
    "LayerShapeTrace",
    "CompressionRecord",
    "infer_shapes",
    "count_params",
    "count_mults",
    "conv_output_shape",
    "layer_depth",
    "compression_record",
    "speedup_and_compression",
    "parse_architecture",
    "write_architecture",
    "load_architecture",
    "build_named_arch",
    "resolve_architecture",
    "NAMED_ARCHITECTURES",
]
