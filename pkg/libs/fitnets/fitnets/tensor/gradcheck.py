"""Central finite-difference verification of hand-written gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import structlog
from typing_extensions import TypedDict

from fitnets.tensor.ops import Tensor

logger = structlog.getLogger(__name__)

LossAndGrads = tuple[float, Mapping[str, Tensor]]
"""A scalar objective value and its analytic gradient per named input."""


class GradCheckReport(TypedDict):
    """Outcome of a finite-difference gradient check."""

    max_relative_error: float
    """Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over all scalars."""
    worst_input: str
    """Name of the input holding the worst scalar."""
    per_input: dict[str, float]
    """Largest relative error per named input."""
    non_finite: bool
    """True when a non-finite loss or gradient was encountered."""
    checked: int
    """Number of scalars perturbed."""
    passed: bool
    """True when finite everywhere and max_relative_error <= tolerance."""


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / scale


def numeric_gradient(
    fn: Callable[[dict[str, Tensor]], LossAndGrads],
    inputs: Mapping[str, Tensor],
    name: str,
    step: float,
) -> Tensor:
    """Central differences of ``fn`` w.r.t. every scalar of ``inputs[name]``."""
    work = {k: np.array(v, copy=True) for k, v in inputs.items()}
    target = work[name]
    grad = np.zeros_like(target)
    flat_target = target.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_target.size):
        original = flat_target[i]
        flat_target[i] = original + step
        plus, _ = fn(work)
        flat_target[i] = original - step
        minus, _ = fn(work)
        flat_target[i] = original
        flat_grad[i] = (plus - minus) / (2.0 * step)
    return grad


def gradient_check(
    fn: Callable[[dict[str, Tensor]], LossAndGrads],
    inputs: Mapping[str, Tensor],
    *,
    step: float = 1e-6,
    tolerance: float = 1e-5,
    wrt: list[str] | None = None,
) -> GradCheckReport:
    """Compare ``fn``'s analytic gradients against central finite differences.

    Args:
        fn: Maps a dict of named inputs to ``(loss, {name: gradient})``.
        inputs: Point at which to check. Must be 64-bit floats.
        step: Finite-difference step.
        tolerance: Maximum accepted relative error.
        wrt: Names to check. Defaults to every name ``fn`` returns a gradient for.
    """
    for name, value in inputs.items():
        if value.dtype != np.float64:
            raise TypeError(
                f"gradient checks need 64-bit floats, input {name!r} is {value.dtype}"
            )

    loss, analytic = fn({k: np.array(v, copy=True) for k, v in inputs.items()})
    names = list(wrt) if wrt is not None else list(analytic)
    non_finite = not np.isfinite(loss)
    per_input: dict[str, float] = {}
    checked = 0
    for name in names:
        a = np.asarray(analytic[name])
        n = numeric_gradient(fn, inputs, name, step)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(n))):
            non_finite = True
            per_input[name] = float("inf")
            continue
        if a.shape != n.shape:
            raise ValueError(
                f"analytic gradient for {name!r} has shape {a.shape}, input is {n.shape}"
            )
        per_input[name] = float(np.max(relative_error(a, n))) if a.size else 0.0
        checked += a.size

    worst_input = max(per_input, key=per_input.__getitem__) if per_input else ""
    max_err = per_input[worst_input] if per_input else 0.0
    passed = (not non_finite) and max_err <= tolerance
    if not passed:
        logger.debug(
            "gradient_check_failed",
            worst_input=worst_input,
            max_relative_error=max_err,
            non_finite=non_finite,
        )
    return {
        "max_relative_error": max_err,
        "worst_input": worst_input,
        "per_input": per_input,
        "non_finite": non_finite,
        "checked": checked,
        "passed": passed,
    }
