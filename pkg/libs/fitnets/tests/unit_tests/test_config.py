from pathlib import Path

import pytest

from fitnets.config import load_config, parse_config, write_config
from fitnets.errors import ConfigError
from fitnets.netarch.types import SoftmaxHead

from .utils import TINY_STUDENT

RUN_FILE = """\
# distill a tiny student
[run]
seed = 3
mode = kd
out = runs/tiny

[data]
train = synth://0/200/2/1x8x8
validation_n = 40
gcn = true

[teacher]
checkpoint = runs/teacher/teacher.fitn

[student.arch]
{student}
[distill]
tau = 2.5
lambda_init = 2   # decays to 1
anneal_epochs = 10

[optimizer]
learning_rate = 0.001
batch_size = 32

[early_stop]
patience_epochs = 3
max_epochs = 6
""".format(student=TINY_STUDENT)


def test_parse_run_file() -> None:
    config = parse_config(RUN_FILE)
    assert config.run.seed == 3
    assert config.run.mode == "kd"
    assert config.data is not None and config.data.gcn and config.data.validation_n == 40
    assert config.teacher is not None and config.teacher.checkpoint == "runs/teacher/teacher.fitn"
    assert config.distill.tau == 2.5 and config.distill.lambda_init == 2.0
    assert config.optimizer.batch_size == 32
    assert config.early_stop.max_epochs == 6
    assert config.student is not None
    student = config.student.resolve("student")
    assert student.name == "tiny-student"
    assert student.head == SoftmaxHead(2)


def test_defaults() -> None:
    config = parse_config("")
    assert config.run.seed == 0
    assert config.run.mode == "ht"
    assert config.data is None
    assert config.optimizer.learning_rate == 0.005
    assert config.early_stop.patience_epochs == 100


def test_write_config_round_trips() -> None:
    config = parse_config(RUN_FILE)
    text = write_config(config)
    again = parse_config(text)
    assert again.model_dump(exclude={"student"}) == config.model_dump(exclude={"student"})
    assert again.student.resolve("student") == config.student.resolve("student")
    assert write_config(again) == text


@pytest.mark.parametrize(
    ("text", "line", "field"),
    [
        ("[run]\nseed = 1\n[bogus]\n", 3, None),
        ("[run]\nseeds = 1\n", 2, "run.seeds"),
        ("[run]\nseed = 1\nseed = 2\n", 3, "run.seed"),
        ("seed = 1\n", 1, None),
        ("[run]\nseed 1\n", 2, None),
        ("[run]\n[run]\n", 2, None),
        ("[run]\nseed = many\n", 2, "run.seed"),
        ("[distill]\n\ntau = 0.5\n", 3, "distill.tau"),
        ("[optimizer]\nkind = adam\n", 2, "optimizer.kind"),
    ],
)
def test_errors_name_line_and_field(text: str, line: int, field) -> None:
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.line == line
    assert excinfo.value.field == field
    assert str(excinfo.value).startswith(f"line {line}")


def test_cross_field_error_names_section() -> None:
    with pytest.raises(ConfigError) as excinfo:
        parse_config("[early_stop]\npatience_epochs = 10\nmax_epochs = 5\n")
    assert excinfo.value.field == "early_stop"


def test_model_resolution() -> None:
    config = parse_config("[teacher]\narch = desk-teacher\ninput = 1x28x28\nclasses = 4\n")
    arch = config.teacher.resolve("teacher")
    assert arch.input_shape == (1, 28, 28)
    assert arch.class_count == 4
    with pytest.raises(ConfigError, match="teacher.arch"):
        parse_config("[teacher]\narch = nothing-like-this\n").teacher.resolve("teacher")
    with pytest.raises(ConfigError, match="CxHxW"):
        parse_config("[teacher]\narch = desk-teacher\ninput = 28x28\n").teacher.resolve("teacher")
    with pytest.raises(ConfigError):
        parse_config("[teacher]\ncheckpoint = t.fitn\n").teacher.resolve("teacher")


def test_inline_architecture_errors_are_config_errors() -> None:
    with pytest.raises(ConfigError, match="student.arch"):
        parse_config("[student.arch]\ninput 1x4x4\nconv 9x9\nsoftmax 2\n").student.resolve("student")


def test_load_config(tmp_path: Path) -> None:
    path = tmp_path / "run.cfg"
    path.write_text(RUN_FILE)
    assert load_config(path) == parse_config(RUN_FILE)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")
