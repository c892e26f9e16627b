"""Forward models g -> s for every benchmark task."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from aembench.errors import ConfigError
from aembench.physics.tasks import TaskSpec, check_bounds, get_task

ForwardModel = Callable[[np.ndarray], np.ndarray]

# Seed of the reference surrogate backing `adm-surrogate` when no checkpoint is given.
REFERENCE_SURROGATE_SEED = 2019


@lru_cache(maxsize=4)
def _reference(task: TaskSpec):
    from aembench.physics.surrogate import reference_surrogate

    return reference_surrogate(task, seed=REFERENCE_SURROGATE_SEED)


def is_surrogate(task: TaskSpec) -> bool:
    return task.surrogate_checkpoint is not None or task.name == "adm-surrogate"


def _surrogate_model(task: TaskSpec):
    from aembench.physics.surrogate import load_surrogate

    if task.surrogate_checkpoint is None:
        return _reference(task)
    return load_surrogate(task.surrogate_checkpoint)


def forward_model(task: TaskSpec) -> ForwardModel:
    """Single-design forward map for `task`."""
    if is_surrogate(task):
        model = _surrogate_model(task)
        return lambda g: model.predict(check_bounds(task, g))[0]
    if task.name == "stack":
        from aembench.physics.stack import simulate_stack

        return lambda g: simulate_stack(g, task=task)
    if task.name == "shell":
        from aembench.physics.shell import simulate_shell

        return lambda g: simulate_shell(g, task=task)
    if task.name == "toy":
        from aembench.physics.toy import simulate_toy

        return lambda g: simulate_toy(g, task)
    if task.name == "linear":
        from aembench.physics.toy import simulate_linear

        return lambda g: simulate_linear(g, task)
    raise ConfigError(f"no forward model for task {task.name!r}")


def simulate(task: TaskSpec, designs: np.ndarray) -> np.ndarray:
    """Batched forward map, (N, d_g) -> (N, d_s)."""
    g = np.atleast_2d(np.asarray(designs, dtype=np.float64))
    if g.shape[0] == 0:
        return np.zeros((0, task.d_s))
    if is_surrogate(task):
        return _surrogate_model(task).predict(check_bounds(task, g))
    f = forward_model(task)
    return np.stack([f(row) for row in g])


__all__ = ["ForwardModel", "TaskSpec", "forward_model", "get_task", "is_surrogate", "simulate"]
