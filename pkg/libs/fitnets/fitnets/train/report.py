"""Training reports: per-epoch curves, stopping outcome and a reproducibility checksum."""

from __future__ import annotations

import csv
import hashlib
import io
import os
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from fitnets._io import atomic_write_bytes, atomic_write_text, encode_json

REPORT_SCHEMA_VERSION = 1

Stage = Literal["supervised", "stage1", "stage2"]
StoppingReason = Literal["patience", "max_epochs"]

_CSV_COLUMNS = ("epoch", "train_loss", "validation_error", "lambda", "learning_rate", "wall_clock_seconds")


class EpochRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    epoch: int
    train_loss: float
    validation_error: float
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    learning_rate: float
    wall_clock_seconds: float = 0.0


class TrainReport(BaseModel):
    """Outcome of one training stage.

    ``validation_error`` is the misclassification rate, except for hint
    training (stage 1) where it is the mean hint loss on the validation split.
    """

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = REPORT_SCHEMA_VERSION
    stage: Stage
    arch: str
    seed: int
    validation_metric: Literal["misclassification", "hint_loss"] = "misclassification"
    initial_validation_error: Optional[float] = None
    epochs: list[EpochRecord] = Field(default_factory=list)
    best_epoch: int = -1
    best_validation_error: Optional[float] = None
    stopping_reason: Optional[StoppingReason] = None
    test_error: Optional[float] = None
    wall_clock_seconds: float = 0.0

    @property
    def lambda_trace(self) -> list[Optional[float]]:
        return [e.lambda_ for e in self.epochs]

    def to_json(self) -> bytes:
        return encode_json(self.model_dump(by_alias=True))

    def checksum(self) -> str:
        """SHA-256 of the canonical JSON with every wall-clock field left out."""
        data = self.model_dump(
            by_alias=True,
            exclude={"wall_clock_seconds": True, "epochs": {"__all__": {"wall_clock_seconds"}}},
        )
        return hashlib.sha256(encode_json(data, indent=False)).hexdigest()

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for e in self.epochs:
            writer.writerow(
                [
                    e.epoch,
                    repr(e.train_loss),
                    repr(e.validation_error),
                    "" if e.lambda_ is None else repr(e.lambda_),
                    repr(e.learning_rate),
                    f"{e.wall_clock_seconds:.6f}",
                ]
            )
        return buffer.getvalue()


def write_report(report: TrainReport, directory: str | os.PathLike[str], name: str) -> None:
    """Write ``{name}.json`` and ``{name}.csv`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    atomic_write_bytes(os.path.join(directory, f"{name}.json"), report.to_json())
    atomic_write_text(os.path.join(directory, f"{name}.csv"), report.to_csv())
