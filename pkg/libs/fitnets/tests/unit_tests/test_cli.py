from pathlib import Path

import pytest
import structlog

from fitnets._io import decode_json
from fitnets.cli import run
from fitnets.netarch.counting import count_mults, count_params
from fitnets.netarch.zoo import build_named_arch
from fitnets.train.checkpoint import load_checkpoint
from fitnets.train.report import TrainReport

from .utils import TINY_STUDENT, TINY_TEACHER

DATA = "synth://0/160/2/1x8x8"


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    structlog.reset_defaults()


def _teacher_config(tmp_path: Path, out: Path) -> Path:
    path = tmp_path / "teacher.cfg"
    path.write_text(
        f"""\
[run]
seed = 1
out = {out}
init_halfwidth = 0.05

[data]
train = {DATA}
test = synth://1/40/2/1x8x8
validation_n = 32

[teacher.arch]
{TINY_TEACHER}
[optimizer]
learning_rate = 0.01
batch_size = 32

[early_stop]
patience_epochs = 2
max_epochs = 3
"""
    )
    return path


def _student_config(tmp_path: Path, teacher: Path, mode: str = "ht") -> Path:
    path = tmp_path / f"student-{mode}.cfg"
    path.write_text(
        f"""\
[run]
seed = 2
mode = {mode}
out = {tmp_path / mode}

[data]
train = {DATA}
validation_n = 32

[teacher]
checkpoint = {teacher}

[student.arch]
{TINY_STUDENT}
[distill]
anneal_epochs = 2

[optimizer]
batch_size = 32

[early_stop]
patience_epochs = 2
max_epochs = 2
"""
    )
    return path


@pytest.fixture
def teacher_run(tmp_path: Path) -> Path:
    out = tmp_path / "teacher"
    assert run(["train-teacher", "--config", str(_teacher_config(tmp_path, out))]) == 0
    return out


def test_no_command_prints_splash_and_usage(capsys) -> None:
    assert run([]) == 2
    out = capsys.readouterr().out
    assert "███████╗" in out
    assert "usage: fitnets" in out


def test_version(capsys) -> None:
    assert run(["--version"]) == 0
    assert capsys.readouterr().out.strip() == "fitnets v0.1.0"


def test_unknown_command_is_a_usage_error(capsys) -> None:
    assert run(["train-everything"]) == 2


def test_gradcheck_passes(capsys) -> None:
    assert run(["gradcheck", "--op", "relu", "conv2d", "--cases", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == ["relu", "conv2d"]
    assert all(line.endswith("ok") for line in lines)


def test_gradcheck_corrupted_fails(capsys) -> None:
    assert run(["gradcheck", "--op", "maxout", "--cases", "2", "--corrupt"]) == 1
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert "gradient check failed for: maxout" in captured.err


def test_inspect_single(capsys) -> None:
    assert run(["inspect", "fitnet1"]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header.split() == ["NAME", "LAYERS", "PARAMS", "MULTS"]
    assert row.split() == ["fitnet1", "11", "251194", str(count_mults(build_named_arch("fitnet1")))]


def test_inspect_pair_reports_ratios(tmp_path: Path, capsys) -> None:
    assert run(["inspect", "desk-teacher", "desk-student", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["NAME", "LAYERS", "PARAMS", "MULTS", "SPEEDUP", "COMPRESSION"]
    assert lines[1].split()[-2:] == ["1.00", "1.00"]
    teacher, student = build_named_arch("desk-teacher"), build_named_arch("desk-student")
    compression = f"{count_params(teacher) / count_params(student):.2f}"
    speedup = f"{count_mults(teacher) / count_mults(student):.2f}"
    assert lines[2].split()[-2:] == [speedup, compression]
    csv_lines = (tmp_path / "inspect.csv").read_text().splitlines()
    assert csv_lines[0] == "name,layers,params,mults,speedup,compression"
    assert len(csv_lines) == 3


def test_inspect_timing(capsys) -> None:
    args = ["inspect", "desk-teacher", "desk-student", "--time", "--data", "synth://0/8/2/1x14x14"]
    assert run([*args, "--time-examples", "8"]) == 0
    header = capsys.readouterr().out.splitlines()[0].split()
    assert "MEASURED_SPEEDUP" in header
    assert "SECONDS_PER_EXAMPLE" in header
    assert run(["inspect", "desk-teacher", "--time"]) == 2
    assert "--time needs --data" in capsys.readouterr().err


def test_inspect_unknown_architecture(capsys) -> None:
    assert run(["inspect", "no-such-net"]) == 2
    assert "Error:" in capsys.readouterr().err


def test_train_teacher_writes_outputs(teacher_run: Path, capsys) -> None:
    names = sorted(p.name for p in teacher_run.iterdir())
    assert names == ["config.txt", "teacher.csv", "teacher.fitn", "teacher.json"]
    checkpoint = load_checkpoint(teacher_run / "teacher.fitn")
    assert checkpoint.arch.name == "tiny-teacher"
    report = TrainReport.model_validate(decode_json((teacher_run / "teacher.json").read_bytes()))
    assert report.stage == "supervised"
    assert 1 <= len(report.epochs) <= 3
    assert report.test_error is not None
    csv_header = (teacher_run / "teacher.csv").read_text().splitlines()[0]
    assert csv_header == "epoch,train_loss,validation_error,lambda,learning_rate,wall_clock_seconds"
    assert "[teacher.arch]" in (teacher_run / "config.txt").read_text()


def test_rerun_with_same_seed_is_identical(tmp_path: Path, teacher_run: Path) -> None:
    again = tmp_path / "again"
    assert run(["train-teacher", "--config", str(_teacher_config(tmp_path, teacher_run)), "--out", str(again)]) == 0
    assert (again / "teacher.fitn").read_bytes() == (teacher_run / "teacher.fitn").read_bytes()
    first = TrainReport.model_validate(decode_json((teacher_run / "teacher.json").read_bytes()))
    second = TrainReport.model_validate(decode_json((again / "teacher.json").read_bytes()))
    assert first.checksum() == second.checksum()


def test_seed_override_changes_the_run(tmp_path: Path, teacher_run: Path) -> None:
    other = tmp_path / "other"
    config = str(_teacher_config(tmp_path, teacher_run))
    assert run(["train-teacher", "--config", config, "--out", str(other), "--seed", "7"]) == 0
    assert (other / "teacher.fitn").read_bytes() != (teacher_run / "teacher.fitn").read_bytes()
    assert "seed = 7" in (other / "config.txt").read_text()


def test_eval(tmp_path: Path, teacher_run: Path, capsys) -> None:
    checkpoint = str(teacher_run / "teacher.fitn")
    out = tmp_path / "eval"
    assert run(["eval", "--checkpoint", checkpoint, "--data", "synth://3/50/2/1x8x8", "--out", str(out)]) == 0
    printed = capsys.readouterr().out.strip()
    error = float(printed)
    assert 0.0 <= error <= 1.0
    assert len(printed.split(".")[1]) == 4
    record = decode_json((out / "eval.json").read_bytes())
    assert record["n"] == 50
    assert record["error"] == pytest.approx(error, abs=5e-5)
    assert record["dataset"] == "synth://3/50/2/1x8x8"


def test_eval_with_config_uses_the_test_split(tmp_path: Path, teacher_run: Path, capsys) -> None:
    config = str(_teacher_config(tmp_path, teacher_run))
    assert run(["eval", "--checkpoint", str(teacher_run / "teacher.fitn"), "--config", config]) == 0
    report = TrainReport.model_validate(decode_json((teacher_run / "teacher.json").read_bytes()))
    assert float(capsys.readouterr().out) == pytest.approx(report.test_error, abs=5e-5)


@pytest.mark.parametrize(
    ("data", "message"),
    [("synth://0/30/3/1x8x8", "classes"), ("synth://0/30/2/1x6x6", "expects inputs")],
)
def test_eval_rejects_mismatched_data(teacher_run: Path, capsys, data: str, message: str) -> None:
    assert run(["eval", "--checkpoint", str(teacher_run / "teacher.fitn"), "--data", data]) == 2
    assert message in capsys.readouterr().err


def test_eval_missing_inputs(tmp_path: Path, capsys) -> None:
    assert run(["eval", "--checkpoint", str(tmp_path / "none.fitn"), "--data", DATA]) == 2
    assert "cannot read checkpoint" in capsys.readouterr().err


@pytest.mark.parametrize(
    ("mode", "files"),
    [
        ("ht", ["stage1.json", "stage2.json"]),
        ("kd", ["stage2.json"]),
        ("backprop", ["supervised.json"]),
    ],
)
def test_distill_modes(tmp_path: Path, teacher_run: Path, mode: str, files: list[str]) -> None:
    config = _student_config(tmp_path, teacher_run / "teacher.fitn", mode)
    assert run(["distill", "--config", str(config)]) == 0
    out = tmp_path / mode
    reports = sorted(p.name for p in out.glob("*.json") if p.name != "summary.json")
    assert reports == files
    summary = decode_json((out / "summary.json").read_bytes())
    assert summary["mode"] == mode
    assert sorted(summary["stages"]) == [f.removesuffix(".json") for f in files]
    assert load_checkpoint(out / "student.fitn").arch.name == "tiny-student"
    assert (out / "config.txt").exists()


def test_distill_mode_override(tmp_path: Path, teacher_run: Path) -> None:
    config = _student_config(tmp_path, teacher_run / "teacher.fitn", "ht")
    out = tmp_path / "override"
    assert run(["distill", "--config", str(config), "--mode", "kd", "--out", str(out)]) == 0
    assert not (out / "stage1.json").exists()
    assert decode_json((out / "summary.json").read_bytes())["mode"] == "kd"


def test_distill_needs_a_teacher_checkpoint(tmp_path: Path, capsys) -> None:
    config = tmp_path / "no-teacher.cfg"
    config.write_text(f"[data]\ntrain = {DATA}\nvalidation_n = 32\n[student.arch]\n{TINY_STUDENT}")
    assert run(["distill", "--config", str(config)]) == 2
    assert "teacher.checkpoint" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path: Path, capsys) -> None:
    config = tmp_path / "bad.cfg"
    config.write_text("[run]\nseed = 1\nlearning_rate = 3\n")
    assert run(["train-teacher", "--config", str(config)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert run(["train-teacher", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_missing_dataset_file_exits_2(tmp_path: Path, capsys) -> None:
    config = tmp_path / "missing-data.cfg"
    config.write_text(
        f"[data]\ntrain = idx:{tmp_path / 'i'},{tmp_path / 'l'}\n[teacher.arch]\n{TINY_TEACHER}"
    )
    assert run(["train-teacher", "--config", str(config)]) == 2
    assert "not found" in capsys.readouterr().err
