import numpy as np
import pytest

from fitnets.distill import cross_entropy, one_hot
from fitnets.errors import OpStateError, ShapeError
from fitnets.netarch.counting import count_params, infer_shapes
from fitnets.netarch.dsl import parse_architecture
from fitnets.netarch.zoo import build_named_arch
from fitnets.tensor.gradcheck import gradient_check
from fitnets.tensor.ops import sigmoid
from fitnets.train.network import BinaryLogits, Network
from fitnets.train.params import (
    ParameterSet,
    derive_seed,
    init_params,
    layer_param_names,
    param_shapes,
)

from .utils import tiny_student, tiny_teacher

SMALL = parse_architecture(
    """
    name small
    input 2x6x6
    conv 3x3x4 pad
    maxout 2
    pool 3x3 overlap 1x1
    conv 2x2x3
    relu
    gpool
    fc 4 pieces 2
    softmax 3
    """
)


def test_param_names_follow_declaration_order() -> None:
    assert list(param_shapes(SMALL)) == [
        "conv1.weight",
        "conv1.bias",
        "conv2.weight",
        "conv2.bias",
        "fc1.weight",
        "fc1.bias",
        "head.weight",
        "head.bias",
    ]
    shapes = param_shapes(SMALL)
    assert shapes["conv1.weight"] == (4, 2, 3, 3)
    assert shapes["conv2.weight"] == (3, 2, 2, 2)
    assert shapes["fc1.weight"] == (8, 3)
    assert shapes["head.weight"] == (3, 4)
    assert layer_param_names(SMALL)[0] == ("conv1.weight", "conv1.bias")


@pytest.mark.parametrize("name", ["fitnet1", "desk-teacher", "aflw-fitnet1", "mnist-student"])
def test_init_matches_counted_params(name: str) -> None:
    arch = build_named_arch(name)
    params = init_params(arch, seed=0)
    assert params.size == count_params(arch)
    params.check_shapes(arch)


def test_init_is_seeded_and_bounded() -> None:
    a = init_params(SMALL, 0.05, seed=3)
    b = init_params(SMALL, 0.05, seed=3)
    c = init_params(SMALL, 0.05, seed=4)
    assert a.equals(b)
    assert not a.equals(c)
    assert all(np.all(np.abs(t) < 0.05) for t in a.values())


def test_parameter_set_helpers() -> None:
    params = init_params(SMALL, seed=0)
    subset = params.subset(["conv1.weight", "conv1.bias"])
    assert list(subset) == ["conv1.weight", "conv1.bias"]
    subset["conv1.weight"][...] = 1.0
    assert not np.all(params["conv1.weight"] == 1.0)
    params.update_from({"conv1.weight": subset["conv1.weight"], "unknown": np.zeros(1)})
    assert np.all(params["conv1.weight"] == 1.0)
    merged = subset.merged({"regressor.weight": np.zeros(2)})
    assert list(merged)[-1] == "regressor.weight"
    with pytest.raises(KeyError):
        subset.merged({"conv1.bias": np.zeros(2)})
    with pytest.raises(KeyError):
        params.subset(["nope"])
    with pytest.raises(ShapeError):
        params.update_from({"conv1.bias": np.zeros(5)})
    assert params.equals(params.copy(), names=["conv1.bias"])
    assert not params.equals(subset)


def test_check_shapes_rejects_other_architecture() -> None:
    with pytest.raises(ShapeError):
        init_params(SMALL).check_shapes(tiny_student())


def test_derive_seed_streams_differ() -> None:
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(0, 1) != derive_seed(1, 1)


def test_forward_shapes_match_inference() -> None:
    net = Network(SMALL)
    params = init_params(SMALL, 0.5, seed=1)
    x = np.random.default_rng(0).standard_normal((5, 2, 6, 6))
    trace = infer_shapes(SMALL)
    for index, layer_trace in enumerate(trace.layers):
        assert net.forward(x, params, until=index).shape == (5, *layer_trace.output_shape)


def test_forward_rejects_wrong_input_shape() -> None:
    with pytest.raises(ShapeError, match="does not match"):
        Network(SMALL).forward(np.zeros((1, 2, 5, 6)), init_params(SMALL))


def test_backward_before_forward() -> None:
    with pytest.raises(OpStateError):
        Network(SMALL).backward(np.zeros((1, 3)))


def test_network_gradient_matches_finite_differences() -> None:
    """Test the full backward pass of a mixed network against central differences."""
    net = Network(SMALL)
    rng = np.random.default_rng(2)
    params = init_params(SMALL, 1.0, seed=5)
    x = rng.standard_normal((3, 2, 6, 6))
    y = one_hot(np.array([0, 2, 1]), 3)

    def fn(values):
        loss, grad = cross_entropy(y, net.forward(values["x"], values))
        grad_x, grads = net.backward(grad)
        return loss, {"x": grad_x, **grads}

    report = gradient_check(fn, {"x": x, **params})
    assert report["passed"], report


def test_param_names_until_boundary() -> None:
    net = Network(tiny_student())
    boundary = tiny_student().conv_boundary(2)
    assert net.param_names_until(boundary) == [
        "conv1.weight",
        "conv1.bias",
        "conv2.weight",
        "conv2.bias",
    ]


def test_binary_logits_match_logistic_unit() -> None:
    a = np.linspace(-30, 30, 61).reshape(-1, 1)
    logits = BinaryLogits().forward(a)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    p = e / e.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(p[:, 1], sigmoid(a[:, 0]), rtol=1e-12, atol=1e-15)
    with pytest.raises(ShapeError):
        BinaryLogits().forward(np.zeros((2, 2)))


def test_sigmoid_head_network() -> None:
    arch = build_named_arch("aflw-fitnet1")
    assert arch.class_count == 2
    net = Network(arch)
    params = init_params(arch, seed=0)
    logits = net.forward(np.zeros((2, 3, 16, 16)), params)
    assert logits.shape == (2, 2)
    assert not logits[:, 0].any()


def test_predict_batches_and_breaks_ties_low() -> None:
    arch = tiny_teacher()
    params = ParameterSet({k: np.zeros_like(v) for k, v in init_params(arch).items()})
    net = Network(arch)
    x = np.random.default_rng(0).random((300, 1, 8, 8))
    predictions = net.predict(x, params, batch_size=64)
    assert predictions.shape == (300,)
    assert not predictions.any()
    with pytest.raises(ShapeError):
        net.forward_batched(x[:0], params)
