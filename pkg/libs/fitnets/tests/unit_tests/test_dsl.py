from pathlib import Path

import pytest

from fitnets.errors import ArchitectureError
from fitnets.netarch.dsl import load_architecture, parse_architecture, write_architecture
from fitnets.netarch.types import (
    ConvSpec,
    FullyConnectedSpec,
    GlobalMaxPoolSpec,
    HintPair,
    MaxoutSpec,
    MaxPoolSpec,
    ReLUSpec,
    SigmoidHead,
    SigmoidSpec,
    SoftmaxHead,
)
from fitnets.netarch.zoo import NAMED_ARCHITECTURES, build_named_arch, resolve_architecture

from .utils import TINY_STUDENT


def test_parse_every_layer_kind() -> None:
    arch = parse_architecture(
        """
        # a comment line
        name example
        input 3x16x16
        hint 2 1
        conv 3x3x8 pad   # trailing comment
        maxout 2
        pool 4x4 overlap 2x2
        conv 2x2x4
        relu
        sigmoid
        gpool
        fc 10 pieces 2
        sigmoid 1
        """
    )
    assert arch.name == "example"
    assert arch.input_shape == (3, 16, 16)
    assert arch.hint == HintPair(guided=2, hint=1)
    assert arch.layers == (
        ConvSpec(3, 3, 8, padded=True),
        MaxoutSpec(2),
        MaxPoolSpec(4, 4, 2, 2),
        ConvSpec(2, 2, 4),
        ReLUSpec(),
        SigmoidSpec(),
        GlobalMaxPoolSpec(),
        FullyConnectedSpec(10, 2),
        SigmoidHead(1),
    )


def test_pool_and_fc_defaults() -> None:
    arch = parse_architecture("input 1x4x4\npool 2x2\nfc 3\nsoftmax 2\n", name="defaults")
    assert arch.name == "defaults"
    assert arch.layers[0] == MaxPoolSpec(2, 2, 0, 0)
    assert arch.layers[1] == FullyConnectedSpec(3, 1)
    assert arch.layers[2] == SoftmaxHead(2)


@pytest.mark.parametrize("name", NAMED_ARCHITECTURES)
def test_canonical_form_round_trips(name: str) -> None:
    arch = build_named_arch(name)
    text = write_architecture(arch)
    parsed = parse_architecture(text)
    assert parsed == arch
    assert write_architecture(parsed) == text


@pytest.mark.parametrize(
    ("text", "line"),
    [
        ("input 1x4x4\nconv 3x3 pad\nsoftmax 2\n", 2),
        ("input 1x4x4\nconv 3x3x2 same\nsoftmax 2\n", 2),
        ("input 1x4x4\n\npool 2x2 overlap 3\nsoftmax 2\n", 3),
        ("input 1x4x4\nmaxout two\nsoftmax 2\n", 2),
        ("input 1x4x4\ndropout 0.5\nsoftmax 2\n", 2),
        ("input 1x4\nsoftmax 2\n", 1),
        ("input 1x4x4\nconv 0x3x2\nsoftmax 2\n", 2),
    ],
)
def test_parse_errors_name_the_line(text: str, line: int) -> None:
    with pytest.raises(ArchitectureError, match=f"^line {line}:"):
        parse_architecture(text)


def test_missing_input_line() -> None:
    with pytest.raises(ArchitectureError, match="input"):
        parse_architecture("conv 3x3x2\nsoftmax 2\n")


def test_load_architecture_names_after_file(tmp_path: Path) -> None:
    path = tmp_path / "mine.arch"
    path.write_text("input 1x8x8\nconv 3x3x2 pad\ngpool\nsoftmax 2\n")
    arch = load_architecture(path)
    assert arch.name == "mine"
    assert resolve_architecture(str(path)) == arch
    assert resolve_architecture(str(path), input_shape=(1, 6, 6)).input_shape == (1, 6, 6)


def test_load_architecture_reports_path(tmp_path: Path) -> None:
    path = tmp_path / "broken.arch"
    path.write_text("input 1x8x8\nconv 3x3\nsoftmax 2\n")
    with pytest.raises(ArchitectureError, match="broken.arch"):
        load_architecture(path)
    with pytest.raises(ArchitectureError, match="cannot read"):
        load_architecture(tmp_path / "missing.arch")


def test_tiny_student_fixture() -> None:
    arch = parse_architecture(TINY_STUDENT)
    assert arch.hint == HintPair(2, 1)
    assert arch.conv_count == 3
