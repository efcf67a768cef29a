from fitnets.train.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from fitnets.train.loop import (
    EarlyStopConfig,
    FitNetResult,
    Mode,
    evaluate,
    resolve_hint,
    stage1_hint_train,
    stage2_kd_train,
    train_fitnet,
    train_supervised,
)
from fitnets.train.network import BinaryLogits, Network
from fitnets.train.optim import (
    Optimizer,
    OptimizerConfig,
    learning_rate_at,
    momentum_at,
    momentum_step,
    rmsprop_step,
)
from fitnets.train.params import (
    ParameterSet,
    derive_seed,
    init_params,
    layer_param_names,
    param_shapes,
)
from fitnets.train.report import (
    REPORT_SCHEMA_VERSION,
    EpochRecord,
    TrainReport,
    write_report,
)

__all__ = [
    "Checkpoint",
    "MAGIC",
    "FORMAT_VERSION",
    "encode_checkpoint",
    "decode_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "EarlyStopConfig",
    "FitNetResult",
    "Mode",
    "evaluate",
    "resolve_hint",
    "stage1_hint_train",
    "stage2_kd_train",
    "train_fitnet",
    "train_supervised",
    "Network",
    "BinaryLogits",
    "Optimizer",
    "OptimizerConfig",
    "learning_rate_at",
    "momentum_at",
    "momentum_step",
    "rmsprop_step",
    "ParameterSet",
    "derive_seed",
    "init_params",
    "layer_param_names",
    "param_shapes",
    "REPORT_SCHEMA_VERSION",
    "EpochRecord",
    "TrainReport",
    "write_report",
]
