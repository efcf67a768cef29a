"""Plain-text architecture format.

One layer per line, headers first::

    name fitnet1
    input 3x32x32
    hint 6 2
    conv 3x3x32 pad
    maxout 2
    pool 2x2 overlap 0x0
    gpool
    fc 500 pieces 2
    softmax 10

Other layer lines: ``relu``, ``sigmoid`` (elementwise) and ``sigmoid 1`` (a
one-unit logistic output head). ``#`` starts a comment. ``hint G H`` declares
that student conv layer G is guided by teacher conv layer H.

``write_architecture`` emits the canonical form; parsing it gives back an equal
``ArchitectureSpec`` and writing that again gives the same text.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Iterable, Optional

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
    SigmoidSpec,
    SoftmaxHead,
)

_DIMS = re.compile(r"^\d+(x\d+)*$")


def _dims(token: str, count: int, lineno: int) -> list[int]:
    if not _DIMS.match(token) or token.count("x") != count - 1:
        raise ArchitectureError(
            f"line {lineno}: expected {'x'.join(['N'] * count)}, got {token!r}"
        )
    return [int(part) for part in token.split("x")]


def _int(token: str, lineno: int) -> int:
    if not token.isdigit():
        raise ArchitectureError(f"line {lineno}: expected an integer, got {token!r}")
    return int(token)


def _parse_layer(words: list[str], lineno: int) -> LayerSpec:
    kind, args = words[0], words[1:]
    if kind == "conv" and len(args) in (1, 2):
        kh, kw, c = _dims(args[0], 3, lineno)
        if len(args) == 2 and args[1] != "pad":
            raise ArchitectureError(f"line {lineno}: unknown conv option {args[1]!r}")
        return ConvSpec(kh, kw, c, padded=len(args) == 2)
    if kind == "pool" and len(args) in (1, 3):
        wh, ww = _dims(args[0], 2, lineno)
        oh = ow = 0
        if len(args) == 3:
            if args[1] != "overlap":
                raise ArchitectureError(f"line {lineno}: unknown pool option {args[1]!r}")
            oh, ow = _dims(args[2], 2, lineno)
        return MaxPoolSpec(wh, ww, oh, ow)
    if kind == "gpool" and not args:
        return GlobalMaxPoolSpec()
    if kind == "maxout" and len(args) == 1:
        return MaxoutSpec(_int(args[0], lineno))
    if kind == "fc" and len(args) in (1, 3):
        pieces = 1
        if len(args) == 3:
            if args[1] != "pieces":
                raise ArchitectureError(f"line {lineno}: unknown fc option {args[1]!r}")
            pieces = _int(args[2], lineno)
        return FullyConnectedSpec(_int(args[0], lineno), pieces)
    if kind == "relu" and not args:
        return ReLUSpec()
    if kind == "sigmoid" and not args:
        return SigmoidSpec()
    if kind == "sigmoid" and len(args) == 1:
        return SigmoidHead(_int(args[0], lineno))
    if kind == "softmax" and len(args) == 1:
        return SoftmaxHead(_int(args[0], lineno))
    raise ArchitectureError(f"line {lineno}: cannot parse layer {' '.join(words)!r}")


def parse_architecture(text: str, *, name: Optional[str] = None) -> ArchitectureSpec:
    """Parse the text format. ``name`` is used when the text has no ``name`` line."""
    arch_name = name
    input_shape: Optional[tuple[int, int, int]] = None
    hint: Optional[HintPair] = None
    layers: list[LayerSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        head = words[0]
        try:
            if head == "name" and len(words) == 2:
                arch_name = words[1]
            elif head == "input" and len(words) == 2:
                c, h, w = _dims(words[1], 3, lineno)
                input_shape = (c, h, w)
            elif head == "hint" and len(words) == 3:
                hint = HintPair(_int(words[1], lineno), _int(words[2], lineno))
            else:
                layers.append(_parse_layer(words, lineno))
        except ArchitectureError as e:
            if str(e).startswith("line "):
                raise
            raise ArchitectureError(f"line {lineno}: {e}") from None
    if input_shape is None:
        raise ArchitectureError("missing 'input CxHxW' line")
    return ArchitectureSpec(arch_name or "unnamed", input_shape, tuple(layers), hint)


def _layer_line(layer: LayerSpec) -> str:
    if isinstance(layer, ConvSpec):
        return f"conv {layer.kh}x{layer.kw}x{layer.out_channels}" + (" pad" if layer.padded else "")
    if isinstance(layer, MaxPoolSpec):
        return f"pool {layer.wh}x{layer.ww} overlap {layer.oh}x{layer.ow}"
    if isinstance(layer, GlobalMaxPoolSpec):
        return "gpool"
    if isinstance(layer, MaxoutSpec):
        return f"maxout {layer.pieces}"
    if isinstance(layer, FullyConnectedSpec):
        return f"fc {layer.units} pieces {layer.pieces}"
    if isinstance(layer, ReLUSpec):
        return "relu"
    if isinstance(layer, SigmoidSpec):
        return "sigmoid"
    if isinstance(layer, SigmoidHead):
        return f"sigmoid {layer.units}"
    if isinstance(layer, SoftmaxHead):
        return f"softmax {layer.classes}"
    raise ArchitectureError(f"unknown layer {layer!r}")


def write_architecture(arch: ArchitectureSpec) -> str:
    lines: list[str] = [f"name {arch.name}", "input " + "x".join(map(str, arch.input_shape))]
    if arch.hint is not None:
        lines.append(f"hint {arch.hint.guided} {arch.hint.hint}")
    lines.extend(_layer_line(layer) for layer in arch.layers)
    return "\n".join(lines) + "\n"


def load_architecture(path: str | os.PathLike[str]) -> ArchitectureSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ArchitectureError(f"cannot read architecture file {p}: {e.strerror}") from None
    try:
        return parse_architecture(text, name=p.stem)
    except ArchitectureError as e:
        raise ArchitectureError(f"{p}: {e}") from None


def parse_lines(lines: Iterable[str], *, name: Optional[str] = None) -> ArchitectureSpec:
    return parse_architecture("\n".join(lines), name=name)
