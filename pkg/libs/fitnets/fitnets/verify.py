"""Finite-difference check suite over every differentiable op and loss.

Each case draws random shapes (batch and channels up to 4, spatial extents up
to 8) and inputs uniform on [-1, 1]. Cases whose inputs sit within ``TIE_MARGIN`` of a
non-differentiable point (max ties, ReLU at 0) are redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
import structlog

from fitnets.distill import Regressor, cross_entropy, hint_loss, kd_loss, one_hot
from fitnets.errors import FitNetsError
from fitnets.netarch.types import (
    ArchitectureSpec,
    ConvSpec,
    MaxoutSpec,
    MaxPoolSpec,
    ReLUSpec,
    SigmoidSpec,
    SoftmaxHead,
)
from fitnets.tensor.gradcheck import LossAndGrads, gradient_check
from fitnets.tensor.ops import (
    Conv2d,
    DiffOp,
    FullyConnected,
    GlobalMaxPool,
    Maxout,
    MaxPool2d,
    ReLU,
    Sigmoid,
    Tensor,
    get_default_dtype,
)
from fitnets.train.network import BinaryLogits, Network

logger = structlog.getLogger(__name__)

TIE_MARGIN = 1e-4
MAX_REDRAWS = 100
TOLERANCE = 1e-5
CASES = 20

LossFn = Callable[[dict[str, Tensor]], LossAndGrads]
Case = tuple[LossFn, dict[str, Tensor], float]
"""Objective, inputs and distance of the inputs from the nearest tie."""


@dataclass(frozen=True)
class OpCheck:
    op: str
    cases: int
    max_relative_error: float
    worst_input: str
    redraws: int
    passed: bool


def _uniform(rng: np.random.Generator, *shape: int) -> Tensor:
    return rng.uniform(-1.0, 1.0, size=shape)


def _op_case(make_op: Callable[[], DiffOp], inputs: dict[str, Tensor], rng: np.random.Generator) -> Case:
    """Objective ``sum(op(*inputs) * R)`` for a fixed random projection ``R``."""
    names = list(inputs)
    reference = make_op()
    out = reference.forward(*inputs.values())
    margin = reference.tie_margin()
    projection = _uniform(rng, *out.shape)

    def fn(values: dict[str, Tensor]) -> LossAndGrads:
        op = make_op()
        y = op.forward(*(values[n] for n in names))
        return float(np.sum(y * projection)), dict(zip(names, op.backward(projection)))

    return fn, inputs, margin


def _conv2d(padded: bool) -> Callable[[np.random.Generator], Case]:
    def build(rng: np.random.Generator) -> Case:
        b, c, o = rng.integers(1, 5, size=3)
        if padded:
            kh, kw = rng.choice([1, 3, 5], size=2)
            h, w = rng.integers(1, 9, size=2)
        else:
            kh, kw = rng.integers(1, 4, size=2)
            h, w = rng.integers(max(kh, 1), 9), rng.integers(max(kw, 1), 9)
        inputs = {
            "x": _uniform(rng, b, c, h, w),
            "weights": _uniform(rng, o, c, kh, kw),
            "bias": _uniform(rng, o),
        }
        return _op_case(lambda: Conv2d(pad=padded), inputs, rng)

    return build


def _maxpool(overlap: bool) -> Callable[[np.random.Generator], Case]:
    def build(rng: np.random.Generator) -> Case:
        b, c = rng.integers(1, 5, size=2)
        wh, ww = rng.integers(2 if overlap else 1, 4, size=2)
        oh = rng.integers(1, wh) if overlap else 0
        ow = rng.integers(1, ww) if overlap else 0
        h, w = rng.integers(wh, 9), rng.integers(ww, 9)
        return _op_case(
            lambda: MaxPool2d((int(wh), int(ww)), (int(oh), int(ow))),
            {"x": _uniform(rng, b, c, h, w)},
            rng,
        )

    return build


def _global_maxpool(rng: np.random.Generator) -> Case:
    b, c, h, w = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 9)
    return _op_case(GlobalMaxPool, {"x": _uniform(rng, b, c, h, w)}, rng)


def _maxout(rng: np.random.Generator) -> Case:
    b, groups, pieces = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
    shape = (b, groups * pieces) if rng.random() < 0.5 else (b, groups * pieces, *rng.integers(1, 9, size=2))
    return _op_case(lambda: Maxout(int(pieces)), {"x": _uniform(rng, *shape)}, rng)


def _fully_connected(rng: np.random.Generator) -> Case:
    b, c, h, w, u = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 9)
    return _op_case(
        FullyConnected,
        {"x": _uniform(rng, b, c, h, w), "weights": _uniform(rng, u, c * h * w), "bias": _uniform(rng, u)},
        rng,
    )


def _elementwise(make_op: Callable[[], DiffOp]) -> Callable[[np.random.Generator], Case]:
    def build(rng: np.random.Generator) -> Case:
        b, c, h, w = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 9)
        return _op_case(make_op, {"x": _uniform(rng, b, c, h, w)}, rng)

    return build


def _head(binary: bool) -> Callable[[np.random.Generator], Case]:
    """Affine output layer followed by softmax cross-entropy."""

    def build(rng: np.random.Generator) -> Case:
        b, d = rng.integers(1, 5), rng.integers(1, 17)
        k = 1 if binary else int(rng.integers(2, 11))
        classes = 2 if binary else k
        y = one_hot(rng.integers(0, classes, size=b), classes)

        def fn(values: dict[str, Tensor]) -> LossAndGrads:
            fc = FullyConnected()
            logits = fc.forward(values["x"], values["weights"], values["bias"])
            expand = BinaryLogits() if binary else None
            if expand is not None:
                logits = expand.forward(logits)
            loss, grad = cross_entropy(y, logits)
            if expand is not None:
                (grad,) = expand.backward(grad)
            return loss, dict(zip(("x", "weights", "bias"), fc.backward(grad)))

        inputs = {"x": _uniform(rng, b, d), "weights": _uniform(rng, k, d), "bias": _uniform(rng, k)}
        return fn, inputs, float("inf")

    return build


def _kd_loss(rng: np.random.Generator) -> Case:
    b, k = rng.integers(1, 5), rng.integers(2, 11)
    tau = float(rng.uniform(1.0, 5.0))
    lam = float(rng.uniform(0.0, 4.0))
    tau_squared = bool(rng.random() < 0.25)
    y = one_hot(rng.integers(0, k, size=b), int(k))
    teacher = _uniform(rng, b, k)

    def fn(values: dict[str, Tensor]) -> LossAndGrads:
        loss, grad = kd_loss(y, values["student_logits"], teacher, tau, lam, tau_squared=tau_squared)
        return loss, {"student_logits": grad}

    return fn, {"student_logits": _uniform(rng, b, k)}, float("inf")


def _hint_loss(rng: np.random.Generator) -> Case:
    b, og, oh = rng.integers(1, 5, size=3)
    nh = rng.integers(1, 7, size=2)
    ng = nh + rng.integers(0, 3, size=2)
    nonlinearity = [None, MaxoutSpec(2), ReLUSpec(), SigmoidSpec()][int(rng.integers(0, 4))]
    pieces = nonlinearity.pieces if isinstance(nonlinearity, MaxoutSpec) else 1
    kernel = ng - nh + 1
    inputs = {
        "guided": _uniform(rng, b, og, *ng),
        Regressor.WEIGHT: _uniform(rng, oh * pieces, og, *kernel),
        Regressor.BIAS: _uniform(rng, oh * pieces),
    }
    hint_shape = (int(oh), int(nh[0]), int(nh[1]))
    guided_shape = (int(og), int(ng[0]), int(ng[1]))
    target = _uniform(rng, b, *hint_shape)

    def make() -> Regressor:
        return Regressor(hint_shape, guided_shape, nonlinearity, inputs)

    reference = make()
    reference.forward(inputs["guided"])
    margin = reference.tie_margin()

    def fn(values: dict[str, Tensor]) -> LossAndGrads:
        loss, grad_guided, grad_params = hint_loss(target, values["guided"], make(), values)
        return loss, {"guided": grad_guided, **grad_params}

    return fn, inputs, margin


def _fitnet_block(rng: np.random.Generator) -> Case:
    """Padded conv, maxout and 2x2 pooling composed by ``Network`` up to the conv boundary."""
    b, c, units = (int(v) for v in rng.integers(1, 5, size=3))
    k = int(rng.choice([1, 3, 5]))
    h, w = (int(v) for v in rng.integers(2, 9, size=2))
    arch = ArchitectureSpec(
        "block",
        (c, h, w),
        (
            ConvSpec(k, k, units * 2, padded=True),
            MaxoutSpec(2),
            MaxPoolSpec(2, 2),
            SoftmaxHead(2),
        ),
    )
    until = arch.conv_boundary(1)
    inputs = {
        "x": _uniform(rng, b, c, h, w),
        "conv1.weight": _uniform(rng, units * 2, c, k, k),
        "conv1.bias": _uniform(rng, units * 2),
    }
    reference = Network(arch)
    out = reference.forward(inputs["x"], inputs, until=until)
    projection = _uniform(rng, *out.shape)

    def fn(values: dict[str, Tensor]) -> LossAndGrads:
        net = Network(arch)
        y = net.forward(values["x"], values, until=until)
        grad_x, grads = net.backward(projection)
        return float(np.sum(y * projection)), {"x": grad_x, **grads}

    return fn, inputs, reference.tie_margin()


CHECKS: dict[str, Callable[[np.random.Generator], Case]] = {
    "conv2d": _conv2d(padded=False),
    "conv2d_padded": _conv2d(padded=True),
    "maxpool2d": _maxpool(overlap=False),
    "maxpool2d_overlap": _maxpool(overlap=True),
    "global_maxpool": _global_maxpool,
    "maxout": _maxout,
    "fully_connected": _fully_connected,
    "relu": _elementwise(ReLU),
    "sigmoid": _elementwise(Sigmoid),
    "softmax_head": _head(binary=False),
    "sigmoid_head": _head(binary=True),
    "kd_loss": _kd_loss,
    "hint_loss": _hint_loss,
    "fitnet_block": _fitnet_block,
}


def _corrupted(fn: LossFn) -> LossFn:
    def wrapped(values: dict[str, Tensor]) -> LossAndGrads:
        loss, grads = fn(values)
        return loss, {k: 2.0 * g for k, g in grads.items()}

    return wrapped


def check_op(
    name: str,
    *,
    cases: int = CASES,
    seed: int = 0,
    tolerance: float = TOLERANCE,
    corrupt: bool = False,
) -> OpCheck:
    """Run ``cases`` random gradient checks of one op."""
    if name not in CHECKS:
        raise FitNetsError(f"unknown op {name!r}; known: {', '.join(CHECKS)}")
    build = CHECKS[name]
    rng = np.random.default_rng(np.random.SeedSequence([seed, sorted(CHECKS).index(name)]))
    worst, worst_input, redraws = 0.0, "", 0
    passed = True
    for _ in range(cases):
        for _attempt in range(MAX_REDRAWS):
            fn, inputs, margin = build(rng)
            if margin > TIE_MARGIN:
                break
            redraws += 1
        else:
            raise FitNetsError(f"{name}: could not draw inputs away from ties", exit_code=1)
        report = gradient_check(_corrupted(fn) if corrupt else fn, inputs, tolerance=tolerance)
        if report["max_relative_error"] >= worst:
            worst, worst_input = report["max_relative_error"], report["worst_input"]
        passed = passed and report["passed"]
    logger.debug("op_checked", op=name, max_relative_error=worst, redraws=redraws, passed=passed)
    return OpCheck(name, cases, worst, worst_input, redraws, passed)


def run_gradcheck_suite(
    ops: Optional[Iterable[str]] = None,
    *,
    cases: int = CASES,
    seed: int = 0,
    corrupt: bool = False,
) -> list[OpCheck]:
    """Check every op in ``ops`` (default: all of ``CHECKS``)."""
    if get_default_dtype() != np.float64:
        raise FitNetsError("gradient checks need the 64-bit default dtype")
    return [check_op(name, cases=cases, seed=seed, corrupt=corrupt) for name in (ops or CHECKS)]
