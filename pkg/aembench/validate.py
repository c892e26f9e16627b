"""Validation helpers for harness commands.

The goal is to reject experiments that cannot run before any training
starts.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Tuple, Union

if TYPE_CHECKING:
    from aembench.harness.experiment import ExperimentConfig

NEEDS_DATASET = ("fit-surrogate", "train", "sweep", "eval")


def missing_inputs(cfg: ExperimentConfig, command: str) -> List[str]:
    """Files the command reads that do not exist."""
    missing = []
    if command in NEEDS_DATASET and not cfg.dataset_path().exists():
        missing.append(f"dataset {cfg.dataset_path()}")
    if cfg.task.checkpoint and not Path(cfg.task.checkpoint).exists():
        missing.append(f"surrogate checkpoint {cfg.task.checkpoint}")
    if command in ("train", "sweep") and cfg.solver.forward_checkpoint:
        if not Path(cfg.solver.forward_checkpoint).exists():
            missing.append(f"forward checkpoint {cfg.solver.forward_checkpoint}")
    if command == "eval" and not cfg.checkpoint_path().exists():
        missing.append(f"solver checkpoint {cfg.checkpoint_path()}")
    return missing


def validate_experiment(
    cfg: ExperimentConfig, command: str
) -> Tuple[bool, Union[str, Dict[str, Any]]]:
    """Validate an experiment for one command.

    Notes:
    - File checks are reported first; callers map them to a missing artifact.
    - Proposal budgets are checked against the solvers that cap them
      (NA candidates, GA population).
    """
    missing = missing_inputs(cfg, command)
    if missing:
        return False, "missing " + ", ".join(missing)

    if command == "sweep" and not cfg.sweep.grid:
        return False, "sweep grid is empty; add hyperparameter lists under [sweep]"

    if cfg.data.n is None and cfg.data.counts() is None:
        return False, "dataset size is unset (data.n or data.n_train/n_val/n_test)"

    t_max = cfg.eval.t_max
    if command == "eval":
        if cfg.solver.kind == "na":
            pool = cfg.solver.na_candidates or cfg.solver.na_candidate_factor * t_max
            if pool < t_max:
                return False, f"NA candidate pool {pool} is smaller than T_max {t_max}"
        if cfg.solver.kind == "ga" and cfg.solver.population < t_max:
            return False, f"GA population {cfg.solver.population} is smaller than T_max {t_max}"

    cells = 1
    for values in cfg.sweep.grid.values():
        cells *= len(values)

    return True, {
        "scale": cfg.scale.name,
        "epochs": cfg.solver.epochs,
        "batch_size": cfg.solver.batch_size,
        "t_max": t_max,
        "sweep_cells": cells if cfg.sweep.grid else 0,
    }
