"""Benchmark task descriptions.

A `TaskSpec` fixes the design dimensionality, the per-dimension bounds and
the spectral grid of a task. The forward maps themselves live in the
sibling modules and are looked up through `aembench.physics.forward_model`.
"""

from __future__ import annotations

import hashlib
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from aembench.config import settings
from aembench.errors import ConfigError, DomainError

BUILTIN_TASKS = ("stack", "shell", "adm-surrogate", "toy", "linear")


class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    d_g: int
    d_s: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    grid: Tuple[float, ...]
    grid_unit: str = "nm"
    spectrum_kind: str = "absorptivity"
    # Only surrogate tasks: path to the IBCHK file serving as the true model.
    surrogate_checkpoint: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "TaskSpec":
        if len(self.lower) != self.d_g or len(self.upper) != self.d_g:
            raise ValueError(f"{self.name}: bounds must have {self.d_g} entries")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"{self.name}: every lower bound must be < upper bound")
        if len(self.grid) != self.d_s:
            raise ValueError(f"{self.name}: grid has {len(self.grid)} points, expected {self.d_s}")
        diffs = np.diff(np.asarray(self.grid))
        if self.d_s > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError(f"{self.name}: spectral grid must be strictly monotone")
        return self

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=np.float64)

    @property
    def mu_g(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    @property
    def r_g(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def wavelengths(self) -> np.ndarray:
        return np.asarray(self.grid, dtype=np.float64)

    def grid_hash(self) -> str:
        return hashlib.sha256(np.asarray(self.grid, dtype=np.float64).tobytes()).hexdigest()[:12]

    def clip(self, g: np.ndarray) -> np.ndarray:
        return np.clip(g, self.lo, self.hi)

    def in_bounds(self, g: np.ndarray, atol: float = 0.0) -> np.ndarray:
        g = np.atleast_2d(g)
        return np.all((g >= self.lo - atol) & (g <= self.hi + atol), axis=-1)


def check_bounds(task: TaskSpec, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape[-1] != task.d_g:
        raise DomainError(f"{task.name}: design has {g.shape[-1]} entries, expected {task.d_g}")
    if not np.all(np.isfinite(g)):
        raise DomainError(f"{task.name}: design contains non-finite values")
    bad = ~task.in_bounds(g)
    if np.any(bad):
        row = np.atleast_2d(g)[int(np.argmax(bad))]
        raise DomainError(f"{task.name}: design {row.tolist()} outside bounds")
    return g


def _uniform(lo: float, hi: float, n: int) -> Tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(lo, hi, n))


def stack_task() -> TaskSpec:
    lo, hi = settings.STACK_THICKNESS_NM
    return TaskSpec(
        name="stack",
        d_g=5,
        d_s=256,
        lower=(lo,) * 5,
        upper=(hi,) * 5,
        grid=_uniform(240.0, 2000.0, 256),
        grid_unit="nm",
        spectrum_kind="absorptivity",
    )


def shell_task() -> TaskSpec:
    lo, hi = settings.SHELL_THICKNESS_NM
    return TaskSpec(
        name="shell",
        d_g=8,
        d_s=201,
        lower=(lo,) * 8,
        upper=(hi,) * 8,
        grid=_uniform(400.0, 800.0, 201),
        grid_unit="nm",
        spectrum_kind="scattering cross-section (nm^2)",
    )


def adm_task(checkpoint: Optional[str] = None) -> TaskSpec:
    # Geometry is normalized; the original parameters (height, periodicity,
    # radii, rotations) are not exposed by the surrogate.
    return TaskSpec(
        name="adm-surrogate",
        d_g=14,
        d_s=2000,
        lower=(-1.0,) * 14,
        upper=(1.0,) * 14,
        grid=_uniform(100.0, 500.0, 2000),
        grid_unit="THz",
        spectrum_kind="absorptivity",
        surrogate_checkpoint=checkpoint,
    )


def toy_task() -> TaskSpec:
    return TaskSpec(
        name="toy",
        d_g=2,
        d_s=32,
        lower=(-1.0, -1.0),
        upper=(1.0, 1.0),
        grid=_uniform(0.0, 1.0, 32),
        grid_unit="1",
        spectrum_kind="signal",
    )


def linear_task() -> TaskSpec:
    return TaskSpec(
        name="linear",
        d_g=3,
        d_s=3,
        lower=(-1.0,) * 3,
        upper=(1.0,) * 3,
        grid=(0.0, 1.0, 2.0),
        grid_unit="1",
        spectrum_kind="signal",
    )


def get_task(name: str, checkpoint: Optional[str] = None) -> TaskSpec:
    """Built-in task by name. `checkpoint` only applies to surrogate tasks."""
    if name == "stack":
        return stack_task()
    if name == "shell":
        return shell_task()
    if name == "adm-surrogate":
        return adm_task(checkpoint)
    if name == "toy":
        return toy_task()
    if name == "linear":
        return linear_task()
    if checkpoint is not None:
        from aembench.physics.surrogate import surrogate_task

        return surrogate_task(checkpoint)
    raise ConfigError(f"unknown task {name!r}; expected one of {BUILTIN_TASKS} or a surrogate checkpoint")
