"""Binary checkpoint format.

Layout, all integers little-endian::

    b"FITN"                      magic
    u32                          format version
    u32                          length of the architecture text in bytes
    bytes                        architecture text (plain-text layer format)
    f64 * count                  parameters, declaration order, row-major
    u64                          count (scalar total, integrity footer)
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np
import structlog

from fitnets._io import atomic_write_bytes
from fitnets.errors import ArchitectureError, CheckpointError, ShapeError
from fitnets.netarch.dsl import parse_architecture, write_architecture
from fitnets.netarch.types import ArchitectureSpec
from fitnets.tensor.ops import get_default_dtype
from fitnets.train.params import ParameterSet, param_shapes

logger = structlog.getLogger(__name__)

MAGIC = b"FITN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII")
_FOOTER = struct.Struct("<Q")


class Checkpoint(NamedTuple):
    arch: ArchitectureSpec
    params: ParameterSet


def encode_checkpoint(arch: ArchitectureSpec, params: ParameterSet) -> bytes:
    try:
        params.check_shapes(arch)
    except ShapeError as e:
        raise CheckpointError(f"parameters do not fit {arch.name}: {e}") from None
    text = write_architecture(arch).encode("utf-8")
    body = b"".join(
        np.ascontiguousarray(params[name], dtype="<f8").tobytes() for name in params
    )
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(text)) + text + body + _FOOTER.pack(params.size)


def decode_checkpoint(data: bytes, *, source: str = "<bytes>") -> Checkpoint:
    if len(data) < _HEADER.size + _FOOTER.size:
        raise CheckpointError(f"{source}: {len(data)} bytes is too short for a checkpoint")
    magic, version, text_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{source}: unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})"
        )
    text_end = _HEADER.size + text_len
    if text_end > len(data) - _FOOTER.size:
        raise CheckpointError(f"{source}: architecture text runs past the end of the file")
    try:
        arch = parse_architecture(data[_HEADER.size : text_end].decode("utf-8"))
    except (UnicodeDecodeError, ArchitectureError) as e:
        raise CheckpointError(f"{source}: embedded architecture is invalid: {e}") from None

    shapes = param_shapes(arch)
    count = sum(int(np.prod(s)) for s in shapes.values())
    expected = text_end + 8 * count + _FOOTER.size
    if len(data) != expected:
        raise CheckpointError(
            f"{source}: expected {expected} bytes for {count} parameters, found {len(data)}"
        )
    (footer,) = _FOOTER.unpack_from(data, len(data) - _FOOTER.size)
    if footer != count:
        raise CheckpointError(f"{source}: footer count {footer} does not match {count} parameters")

    flat = np.frombuffer(data, dtype="<f8", count=count, offset=text_end)
    dtype = get_default_dtype()
    tensors = {}
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        tensors[name] = flat[offset : offset + size].reshape(shape).astype(dtype)
        offset += size
    return Checkpoint(arch, ParameterSet(tensors))


def save_checkpoint(
    path: str | os.PathLike[str], arch: ArchitectureSpec, params: ParameterSet
) -> Path:
    target = atomic_write_bytes(path, encode_checkpoint(arch, params))
    logger.info("checkpoint_saved", path=str(target), arch=arch.name, params=params.size)
    return target


def load_checkpoint(path: str | os.PathLike[str]) -> Checkpoint:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {p}: {e.strerror}") from None
    return decode_checkpoint(data, source=str(p))
