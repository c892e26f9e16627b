"""Cheap analytic tasks for CI-scale runs.

`toy` depends on the design only through its radius, so every circle of
designs maps to one spectrum. `linear` is a bijective linear map, the
opposite extreme.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from aembench.physics.tasks import TaskSpec, check_bounds, linear_task, toy_task

# Fixed, well conditioned (singular values ~ 1.9, 1.2, 0.8).
LINEAR_MAP = np.array(
    [
        [1.2, 0.3, -0.2],
        [-0.4, 1.0, 0.5],
        [0.1, -0.6, 0.9],
    ]
)


def simulate_toy(g: np.ndarray, task: Optional[TaskSpec] = None) -> np.ndarray:
    task = task or toy_task()
    g = check_bounds(task, g)
    radius_sq = float(g[0] ** 2 + g[1] ** 2)
    return np.sin(3.0 * np.pi * radius_sq * task.wavelengths)


def simulate_linear(g: np.ndarray, task: Optional[TaskSpec] = None) -> np.ndarray:
    task = task or linear_task()
    g = check_bounds(task, g)
    return LINEAR_MAP @ g
