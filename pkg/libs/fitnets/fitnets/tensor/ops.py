"""Differentiable operators for sequential convolutional networks.

Tensors are plain numpy arrays laid out as ``(batch, channels, height, width)``
for feature maps and ``(batch, features)`` for vectors. Every operator is a small
object that caches what its backward pass needs:

    op = Conv2d(pad=True)
    y = op.forward(x, weights, bias)
    grad_x, grad_w, grad_b = op.backward(grad_y)

``backward`` always returns one gradient per ``forward`` argument, in order.

Conventions:
    - Convolution is cross-correlation with stride 1. ``pad=True`` zero-pads
      ``(k - 1) // 2`` on each side, which preserves the spatial size for odd
      kernels.
    - Max operations (pooling, maxout) route the gradient to the first maximal
      element in row-major scan order.
    - The ReLU derivative at 0 is 0.
"""

from __future__ import annotations

import math
from typing import ClassVar, Optional, Union

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from fitnets.errors import OpStateError, ShapeError

Tensor = npt.NDArray[np.floating]

_DTYPES = {"float64": np.float64, "float32": np.float32}
_default_dtype: type[np.floating] = np.float64


def set_default_dtype(dtype: Union[str, type[np.floating]]) -> None:
    """Switch the element type used for new data and parameters."""
    global _default_dtype
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ValueError(f"Unsupported dtype {dtype!r}, expected one of {sorted(_DTYPES)}")
        dtype = _DTYPES[dtype]
    if dtype not in (np.float64, np.float32):
        raise ValueError(f"Unsupported dtype {dtype!r}")
    _default_dtype = dtype


def get_default_dtype() -> type[np.floating]:
    return _default_dtype


def as_tensor(x: npt.ArrayLike) -> Tensor:
    """Return ``x`` as a C-contiguous array of the default element type."""
    return np.ascontiguousarray(x, dtype=_default_dtype)


def uniform_init(
    rng: np.random.Generator, shape: tuple[int, ...], halfwidth: float
) -> Tensor:
    """Draw every scalar independently from U(-halfwidth, halfwidth)."""
    if halfwidth <= 0:
        raise ValueError(f"halfwidth must be positive, got {halfwidth}")
    return rng.uniform(-halfwidth, halfwidth, size=shape).astype(_default_dtype)


def _min_top2_gap(values: np.ndarray) -> float:
    """Smallest gap between the two largest entries along the last axis."""
    if values.shape[-1] < 2 or values.size == 0:
        return math.inf
    top2 = np.partition(values, -2, axis=-1)[..., -2:]
    return float(np.min(top2[..., 1] - top2[..., 0]))


class DiffOp:
    """Base class: a forward map with a cached, hand-written backward."""

    kind: ClassVar[str] = "op"
    n_params: ClassVar[int] = 0

    def __init__(self) -> None:
        self._cache: Optional[dict] = None

    def _cached(self) -> dict:
        if self._cache is None:
            raise OpStateError(f"{self.kind}: backward called before forward")
        return self._cache

    def forward(self, x: Tensor, *params: Tensor) -> Tensor:
        raise NotImplementedError

    def backward(self, grad_out: Tensor) -> tuple[Tensor, ...]:
        raise NotImplementedError

    def tie_margin(self) -> float:
        """Distance of the last forward inputs from a non-differentiable point."""
        return math.inf

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


class Conv2d(DiffOp):
    kind = "conv2d"
    n_params = 2

    def __init__(self, pad: bool = False) -> None:
        super().__init__()
        self.pad = pad

    def __repr__(self) -> str:
        return f"Conv2d(pad={self.pad})"

    def _padding(self, kh: int, kw: int) -> tuple[int, int]:
        if not self.pad:
            return 0, 0
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(
                f"same padding needs odd kernel extents, got {kh}x{kw}"
            )
        return (kh - 1) // 2, (kw - 1) // 2

    def forward(self, x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
        if x.ndim != 4 or weights.ndim != 4:
            raise ShapeError(
                f"conv2d expects 4-d input and weights, got input {x.shape} "
                f"and weights {weights.shape}"
            )
        _, c, h, w = x.shape
        o, wc, kh, kw = weights.shape
        if wc != c:
            raise ShapeError(
                f"conv2d channel mismatch: input {x.shape} has {c} channels, "
                f"weights {weights.shape} expect {wc}"
            )
        if bias.shape != (o,):
            raise ShapeError(f"conv2d bias {bias.shape} does not match weights {weights.shape}")
        ph, pw = self._padding(kh, kw)
        if kh > h + 2 * ph or kw > w + 2 * pw:
            raise ShapeError(f"conv2d kernel {kh}x{kw} does not fit input {x.shape}")

        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
        # (B, C, H', W', kh, kw)
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
        out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3]))
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        out += bias[None, :, None, None]
        self._cache = {
            "windows": windows,
            "weights": weights,
            "padding": (ph, pw),
            "input_shape": x.shape,
        }
        return out

    def backward(self, grad_out: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        cache = self._cached()
        windows = cache["windows"]
        weights = cache["weights"]
        ph, pw = cache["padding"]
        _, _, h, w = cache["input_shape"]
        _, _, kh, kw = weights.shape

        grad_bias = grad_out.sum(axis=(0, 2, 3))
        grad_weights = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))

        # Full correlation of the upstream gradient with the flipped kernel.
        gpad = np.pad(grad_out, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        gwin = sliding_window_view(gpad, (kh, kw), axis=(2, 3))
        flipped = weights[:, :, ::-1, ::-1]
        grad_xp = np.tensordot(gwin, flipped, axes=([1, 4, 5], [0, 2, 3]))
        grad_xp = grad_xp.transpose(0, 3, 1, 2)
        grad_input = np.ascontiguousarray(grad_xp[:, :, ph : ph + h, pw : pw + w])
        return grad_input, grad_weights, grad_bias


def pool_output_extent(extent: int, window: int, overlap: int) -> int:
    """Output size of a max-pooling window sliding with stride ``window - overlap``."""
    stride = window - overlap
    if stride < 1:
        raise ShapeError(f"pool overlap {overlap} must be smaller than window {window}")
    if window > extent:
        raise ShapeError(f"pool window {window} does not fit extent {extent}")
    return (extent - window) // stride + 1


class MaxPool2d(DiffOp):
    kind = "maxpool2d"

    def __init__(self, window: tuple[int, int], overlap: tuple[int, int] = (0, 0)) -> None:
        super().__init__()
        wh, ww = window
        oh, ow = overlap
        if oh >= wh or ow >= ww:
            raise ShapeError(f"pool overlap {overlap} must be smaller than window {window}")
        self.window = (wh, ww)
        self.overlap = (oh, ow)
        self.stride = (wh - oh, ww - ow)

    def __repr__(self) -> str:
        return f"MaxPool2d(window={self.window}, overlap={self.overlap})"

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4:
            raise ShapeError(f"maxpool2d expects a 4-d input, got {x.shape}")
        b, c, h, w = x.shape
        wh, ww = self.window
        sh, sw = self.stride
        out_h = pool_output_extent(h, wh, self.overlap[0])
        out_w = pool_output_extent(w, ww, self.overlap[1])
        windows = sliding_window_view(x, (wh, ww), axis=(2, 3))[:, :, ::sh, ::sw]
        windows = windows[:, :, :out_h, :out_w].reshape(b, c, out_h, out_w, wh * ww)
        # argmax returns the first maximum: row-major tie-break inside a window.
        arg = np.argmax(windows, axis=-1)
        out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
        self._cache = {"arg": arg, "input_shape": x.shape, "windows": windows}
        return np.ascontiguousarray(out)

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        cache = self._cached()
        arg = cache["arg"]
        b, c, h, w = cache["input_shape"]
        _, ww = self.window
        sh, sw = self.stride
        out_h, out_w = arg.shape[2:]

        rows = np.arange(out_h)[:, None] * sh + arg // ww
        cols = np.arange(out_w)[None, :] * sw + arg % ww
        bi = np.arange(b)[:, None, None, None]
        ci = np.arange(c)[None, :, None, None]
        grad_input = np.zeros((b, c, h, w), dtype=grad_out.dtype)
        # Overlapping windows may pick the same input: accumulate.
        np.add.at(grad_input, (bi, ci, rows, cols), grad_out)
        return (grad_input,)

    def tie_margin(self) -> float:
        return _min_top2_gap(self._cached()["windows"])


class GlobalMaxPool(DiffOp):
    kind = "global_maxpool"

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4:
            raise ShapeError(f"global_maxpool expects a 4-d input, got {x.shape}")
        b, c, h, w = x.shape
        flat = x.reshape(b, c, h * w)
        arg = np.argmax(flat, axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)
        self._cache = {"arg": arg, "input_shape": x.shape, "flat": flat}
        return out.reshape(b, c, 1, 1)

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        cache = self._cached()
        b, c, h, w = cache["input_shape"]
        grad_input = np.zeros((b, c, h * w), dtype=grad_out.dtype)
        np.put_along_axis(
            grad_input, cache["arg"][..., None], grad_out.reshape(b, c, 1), axis=-1
        )
        return (grad_input.reshape(b, c, h, w),)

    def tie_margin(self) -> float:
        return _min_top2_gap(self._cached()["flat"])


class Maxout(DiffOp):
    """Maximum over ``pieces`` contiguous channels: group i is ``[i*g, (i+1)*g)``."""

    kind = "maxout"

    def __init__(self, pieces: int) -> None:
        super().__init__()
        if pieces < 1:
            raise ShapeError(f"maxout needs at least one piece, got {pieces}")
        self.pieces = pieces

    def __repr__(self) -> str:
        return f"Maxout(pieces={self.pieces})"

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim < 2:
            raise ShapeError(f"maxout expects a batched input, got {x.shape}")
        b, channels, *rest = x.shape
        if channels % self.pieces:
            raise ShapeError(
                f"maxout: {channels} channels are not divisible by {self.pieces} pieces"
            )
        grouped = x.reshape(b, channels // self.pieces, self.pieces, *rest)
        arg = np.argmax(grouped, axis=2)
        out = np.take_along_axis(grouped, arg[:, :, None], axis=2)[:, :, 0]
        self._cache = {"arg": arg, "grouped_shape": grouped.shape, "grouped": grouped}
        return np.ascontiguousarray(out)

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        cache = self._cached()
        grouped_shape = cache["grouped_shape"]
        grad = np.zeros(grouped_shape, dtype=grad_out.dtype)
        np.put_along_axis(grad, cache["arg"][:, :, None], grad_out[:, :, None], axis=2)
        b, groups, pieces, *rest = grouped_shape
        return (grad.reshape(b, groups * pieces, *rest),)

    def tie_margin(self) -> float:
        grouped = np.moveaxis(self._cached()["grouped"], 2, -1)
        return _min_top2_gap(grouped)


class FullyConnected(DiffOp):
    """Affine map over the flattened non-batch axes: ``y = x W^T + b``."""

    kind = "fully_connected"
    n_params = 2

    def forward(self, x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
        b = x.shape[0]
        flat = x.reshape(b, -1)
        if weights.ndim != 2 or weights.shape[1] != flat.shape[1]:
            raise ShapeError(
                f"fully_connected mismatch: input {x.shape} flattens to "
                f"{flat.shape[1]} features, weights are {weights.shape}"
            )
        if bias.shape != (weights.shape[0],):
            raise ShapeError(f"fully_connected bias {bias.shape} does not match weights {weights.shape}")
        self._cache = {"flat": flat, "weights": weights, "input_shape": x.shape}
        return flat @ weights.T + bias

    def backward(self, grad_out: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        cache = self._cached()
        grad_weights = grad_out.T @ cache["flat"]
        grad_bias = grad_out.sum(axis=0)
        grad_input = (grad_out @ cache["weights"]).reshape(cache["input_shape"])
        return grad_input, grad_weights, grad_bias


class ReLU(DiffOp):
    kind = "relu"

    def forward(self, x: Tensor) -> Tensor:
        self._cache = {"x": x}
        return np.maximum(x, 0)

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        x = self._cached()["x"]
        return (grad_out * (x > 0),)

    def tie_margin(self) -> float:
        x = self._cached()["x"]
        return float(np.min(np.abs(x))) if x.size else math.inf


def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows and gives exactly 0.5 at 0.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Sigmoid(DiffOp):
    kind = "sigmoid"

    def forward(self, x: Tensor) -> Tensor:
        y = sigmoid(x)
        self._cache = {"y": y}
        return y

    def backward(self, grad_out: Tensor) -> tuple[Tensor]:
        y = self._cached()["y"]
        return (grad_out * y * (1.0 - y),)


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
]
