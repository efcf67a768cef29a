"""Run configuration files.

A run file is a sectioned ``key = value`` text; architecture sections hold the
plain-text layer format verbatim::

    [run]
    seed = 3
    mode = ht

    [data]
    train = synth://0/2000/10/1x14x14
    validation_n = 500

    [teacher]
    checkpoint = runs/teacher/teacher.fitn

    [student.arch]
    name tiny
    input 1x14x14
    conv 3x3x8 pad
    ...

``#`` starts a comment. Values are validated by the pydantic records below;
errors name the offending line and dotted field.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from fitnets.data.pipeline import DataConfig
from fitnets.distill import DistillConfig
from fitnets.errors import ArchitectureError, ConfigError
from fitnets.netarch.dsl import parse_architecture, write_architecture
from fitnets.netarch.types import ArchitectureSpec
from fitnets.netarch.zoo import resolve_architecture
from fitnets.train.loop import EarlyStopConfig, Mode
from fitnets.train.optim import OptimizerConfig

_SECTION = re.compile(r"^\[([a-z_.]+)\]$")
_KEY_VALUE = re.compile(r"^([a-z_][a-z0-9_]*)\s*=\s*(.*)$")
_SHAPE = re.compile(r"^(\d+)x(\d+)x(\d+)$")


class RunSettings(BaseModel):
    seed: int = 0
    out: str = "runs"
    mode: Mode = "ht"
    dtype: Literal["float64", "float32"] = "float64"
    init_halfwidth: float = Field(default=0.005, gt=0, description="Uniform init range U(-a, a).")
    skip_stage1: bool = False


class ModelConfig(BaseModel):
    """A network given by name, file, inline text or checkpoint."""

    arch: Optional[str] = Field(default=None, description="Architecture name or path to a layer file.")
    arch_text: Optional[str] = Field(default=None, description="Inline layer format from [<model>.arch].")
    checkpoint: Optional[str] = None
    input: Optional[str] = Field(default=None, description="CxHxW override of the input shape.")
    classes: int = Field(default=10, ge=1)

    def input_shape(self) -> Optional[tuple[int, int, int]]:
        if self.input is None:
            return None
        match = _SHAPE.match(self.input)
        if not match:
            raise ConfigError(f"expected CxHxW, got {self.input!r}", field="input")
        c, h, w = map(int, match.groups())
        return c, h, w

    def resolve(self, role: str) -> ArchitectureSpec:
        """Build the architecture this record describes (not the checkpoint)."""
        try:
            if self.arch_text is not None:
                arch = parse_architecture(self.arch_text, name=role)
                shape = self.input_shape()
                return arch.with_input_shape(shape) if shape else arch
            if self.arch is not None:
                return resolve_architecture(
                    self.arch, input_shape=self.input_shape(), classes=self.classes
                )
        except ArchitectureError as e:
            raise ConfigError(str(e), field=f"{role}.arch") from None
        raise ConfigError(f"[{role}] needs 'arch = NAME|PATH' or a [{role}.arch] section", field=role)


class RunConfig(BaseModel):
    run: RunSettings = Field(default_factory=RunSettings)
    data: Optional[DataConfig] = None
    teacher: Optional[ModelConfig] = None
    student: Optional[ModelConfig] = None
    distill: DistillConfig = Field(default_factory=DistillConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    early_stop: EarlyStopConfig = Field(default_factory=EarlyStopConfig)


_SECTIONS: dict[str, type[BaseModel]] = {
    "run": RunSettings,
    "data": DataConfig,
    "teacher": ModelConfig,
    "student": ModelConfig,
    "distill": DistillConfig,
    "optimizer": OptimizerConfig,
    "early_stop": EarlyStopConfig,
}
_ARCH_SECTIONS = ("teacher.arch", "student.arch")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run file."""
    values: dict[str, dict[str, str]] = {}
    lines: dict[tuple[str, str], int] = {}
    arch_lines: dict[str, list[str]] = {}
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        header = _SECTION.match(line)
        if header:
            section = header.group(1)
            if section not in _SECTIONS and section not in _ARCH_SECTIONS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            if section in values or section in arch_lines:
                raise ConfigError(f"section [{section}] appears twice", line=lineno)
            if section in _ARCH_SECTIONS:
                arch_lines[section] = []
            else:
                values[section] = {}
            continue
        if section is None:
            raise ConfigError("expected a [section] header first", line=lineno)
        if section in _ARCH_SECTIONS:
            arch_lines[section].append(line)
            continue
        kv = _KEY_VALUE.match(line)
        if not kv:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = kv.group(1), kv.group(2).strip()
        if key not in _SECTIONS[section].model_fields or key == "arch_text":
            raise ConfigError(f"unknown key {key!r}", line=lineno, field=f"{section}.{key}")
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, field=f"{section}.{key}")
        values[section][key] = value
        lines[(section, key)] = lineno

    data: dict[str, dict[str, str]] = {k: v for k, v in values.items()}
    for arch_section, body in arch_lines.items():
        owner = arch_section.split(".")[0]
        data.setdefault(owner, {})["arch_text"] = "\n".join(body) + "\n"
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = [str(part) for part in error["loc"]]
        field = ".".join(loc)
        line = lines.get((loc[0], loc[1])) if len(loc) > 1 else None
        raise ConfigError(error["msg"], line=line, field=field) from None


def load_config(path: str | os.PathLike[str]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}") from None
    return parse_config(text)


def _format(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def write_config(config: RunConfig, *, resolved: Optional[dict[str, ArchitectureSpec]] = None) -> str:
    """Serialize ``config``; ``resolved`` architectures are written inline."""
    out: list[str] = []
    for name in _SECTIONS:
        record = getattr(config, name)
        if record is None:
            continue
        out.append(f"[{name}]")
        for key, value in record.model_dump(exclude_none=True).items():
            if key == "arch_text":
                continue
            out.append(f"{key} = {_format(value)}")
        out.append("")
        arch = (resolved or {}).get(name)
        if arch is None and isinstance(record, ModelConfig) and record.arch_text is not None:
            arch = record.resolve(name)
        if arch is not None:
            out.append(f"[{name}.arch]")
            out.append(write_architecture(arch))
    return "\n".join(out).rstrip("\n") + "\n"
