from fitnets.tensor.gradcheck import GradCheckReport, gradient_check, relative_error
from fitnets.tensor.ops import (
    Conv2d,
    DiffOp,
    FullyConnected,
    GlobalMaxPool,
    MaxPool2d,
    Maxout,
    ReLU,
    Sigmoid,
    Tensor,
    as_tensor,
    get_default_dtype,
    pool_output_extent,
    set_default_dtype,
    sigmoid,
    uniform_init,
)

__all__ = [
    "Tensor",
    "DiffOp",
    "Conv2d",
    "MaxPool2d",
    "GlobalMaxPool",
    "Maxout",
    "FullyConnected",
    "ReLU",
    "Sigmoid",
    "sigmoid",
    "pool_output_extent",
    "set_default_dtype",
    "get_default_dtype",
    "as_tensor",
    "uniform_init",
    "gradient_check",
    "relative_error",
    "GradCheckReport",
]
