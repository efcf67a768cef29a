"""Exceptions raised by fitnets.

Every error carries a human readable ``detail`` and the process exit code the
command line reports for it:

    - 0: success
    - 1: verification or training failure
    - 2: usage, configuration or input error
"""

import typing


class FitNetsError(Exception):
    """Base class for all fitnets errors.

    Args:
        detail (str | None, optional): Detailed error message. If None, the class
            docstring's first line is used.
        exit_code (int | None, optional): Exit code reported by the CLI. Defaults
            to the class level ``exit_code``.

    Example:
        ```python
        raise ShapeError("weights expect 3 input channels, input has 4")
        # ShapeError(exit_code=2, detail='weights expect 3 input channels, ...')
        ```
    """

    exit_code: int = 2

    def __init__(
        self,
        detail: typing.Optional[str] = None,
        *,
        exit_code: typing.Optional[int] = None,
    ) -> None:
        if detail is None:
            detail = (self.__class__.__doc__ or self.__class__.__name__).strip()
            detail = detail.splitlines()[0]
        if exit_code is not None:
            self.exit_code = exit_code
        self.detail = detail
        super().__init__(detail)

    def __str__(self) -> str:
        return self.detail

    def __repr__(self) -> str:
        class_name = self.__class__.__name__
        return f"{class_name}(exit_code={self.exit_code!r}, detail={self.detail!r})"


class ShapeError(FitNetsError, ValueError):
    """Tensor shapes are incompatible."""


class OpStateError(FitNetsError, RuntimeError):
    """Backward was requested before forward."""

    exit_code = 1


class ArchitectureError(FitNetsError, ValueError):
    """Architecture description is invalid."""


class DistillError(FitNetsError, ValueError):
    """Distillation inputs or settings are invalid."""


class DataFormatError(FitNetsError, ValueError):
    """Dataset file or URI is invalid."""


class ArityError(FitNetsError, ValueError):
    """Network head does not match the dataset classes."""


class CheckpointError(FitNetsError, ValueError):
    """Checkpoint file is corrupt or unsupported."""


class ConfigError(FitNetsError, ValueError):
    """Run configuration is invalid.

    Carries the offending ``line`` (1-based) and/or dotted ``field`` when known.
    """

    def __init__(
        self,
        detail: typing.Optional[str] = None,
        *,
        line: typing.Optional[int] = None,
        field: typing.Optional[str] = None,
    ) -> None:
        self.line = line
        self.field = field
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if field is not None:
            prefix.append(f"field {field!r}")
        if prefix and detail is not None:
            detail = f"{', '.join(prefix)}: {detail}"
        super().__init__(detail)


class DivergenceError(FitNetsError, ArithmeticError):
    """Training produced a non-finite loss or gradient."""

    exit_code = 1


__all__ = [
    "FitNetsError",
    "ShapeError",
    "OpStateError",
    "ArchitectureError",
    "DistillError",
    "DataFormatError",
    "ArityError",
    "CheckpointError",
    "ConfigError",
    "DivergenceError",
]
