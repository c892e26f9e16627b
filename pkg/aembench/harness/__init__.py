"""Experiment files, run records and the commands behind the CLI."""

from aembench.harness.commands import (
    cmd_eval,
    cmd_fit_surrogate,
    cmd_gen_data,
    cmd_report,
    cmd_sweep,
    cmd_train,
)
from aembench.harness.experiment import ExperimentConfig, load_experiment
from aembench.harness.runs import RunLog, RunRecord, content_hash, file_hash

__all__ = [
    "ExperimentConfig",
    "RunLog",
    "RunRecord",
    "cmd_eval",
    "cmd_fit_surrogate",
    "cmd_gen_data",
    "cmd_report",
    "cmd_sweep",
    "cmd_train",
    "content_hash",
    "file_hash",
    "load_experiment",
]
