from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import orjson


def _orjson_default(obj: Any) -> Any:
    if hasattr(obj, "model_dump") and callable(obj.model_dump):
        return obj.model_dump(mode="json")
    elif isinstance(obj, (set, frozenset)):
        return sorted(obj)
    elif isinstance(obj, Path):
        return str(obj)
    elif isinstance(obj, np.generic):
        return obj.item()
    else:
        raise TypeError(f"Object of type {type(obj)} is not JSON serializable")


def encode_json(obj: Any, *, indent: bool = True) -> bytes:
    """Canonical JSON: sorted keys, numpy scalars and arrays unwrapped."""
    option = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS
    if indent:
        option |= orjson.OPT_INDENT_2
    return orjson.dumps(obj, _orjson_default, option)


def decode_json(data: bytes | str) -> Any:
    return orjson.loads(data)


def atomic_write_bytes(path: str | os.PathLike[str], data: bytes) -> Path:
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
    except BaseException:
        # Don't leave partial files behind.
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def atomic_write_text(path: str | os.PathLike[str], text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
