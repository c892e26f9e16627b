"""Re-simulation error and the best-of-T curve.

r_T is the mean over test targets of the smallest re-simulation error among
a solver's first T proposals, with proposals re-simulated through the true
forward model.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from aembench.errors import MetricError
from aembench.physics import simulate
from aembench.physics.tasks import TaskSpec, check_bounds

logger = logging.getLogger(__name__)


def resim_mse(s: np.ndarray, s_hat: np.ndarray) -> float:
    s, s_hat = np.asarray(s, dtype=np.float64), np.asarray(s_hat, dtype=np.float64)
    if s.shape != s_hat.shape:
        raise MetricError(f"resim_mse: length mismatch {s.shape} vs {s_hat.shape}")
    return float(np.mean((s - s_hat) ** 2))


def resim_errors_one(task: TaskSpec, target: np.ndarray, designs: np.ndarray) -> np.ndarray:
    """Errors of one target's ordered proposals, shape (T,)."""
    designs = check_bounds(task, np.atleast_2d(designs))
    if np.all(designs == designs[0]):
        # Deterministic solvers repeat one design.
        spectrum = simulate(task, designs[:1])
        return np.full(len(designs), np.mean((spectrum[0] - target) ** 2))
    spectra = simulate(task, designs)
    return np.mean((spectra - target[None, :]) ** 2, axis=1)


def resim_error_matrix(
    task: TaskSpec,
    targets: np.ndarray,
    designs: Sequence[np.ndarray],
    jobs: int = 1,
) -> np.ndarray:
    """(n_targets, T) re-simulation errors. Row order follows `targets` for any `jobs`."""
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if len(designs) != len(targets):
        raise MetricError(f"{len(designs)} proposal sets for {len(targets)} targets")
    pairs = list(zip(targets, designs))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda p: resim_errors_one(task, *p), pairs))
    else:
        rows = [resim_errors_one(task, t, d) for t, d in pairs]
    return np.vstack(rows)


def prefix_minimum(errors: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(errors, dtype=np.float64), axis=1)


def rt_from_errors(errors: np.ndarray):
    """(r_T, p25, p75) per T from an error matrix of shape (n_targets, T_max)."""
    errors = np.atleast_2d(np.asarray(errors, dtype=np.float64))
    if errors.size == 0:
        raise MetricError("empty error matrix")
    if np.any(errors < 0) or not np.all(np.isfinite(errors)):
        raise MetricError("re-simulation errors must be finite and non-negative")
    best = prefix_minimum(errors)
    r = np.empty(best.shape[1])
    for t in range(best.shape[1]):
        r[t] = np.mean(np.ascontiguousarray(best[:, t]))
    p25 = np.percentile(best, 25, axis=0)
    p75 = np.percentile(best, 75, axis=0)
    return r, p25, p75


class RTCurve(BaseModel):
    solver: str
    task: str
    T: List[int]
    r: List[float]
    p25: List[float]
    p75: List[float]
    # Running-minimum errors per target, (n_targets, T_max).
    best_errors: List[List[float]] = Field(default_factory=list)

    @property
    def r1(self) -> float:
        return self.r[0]

    @classmethod
    def from_errors(cls, solver: str, task: str, errors: np.ndarray) -> "RTCurve":
        r, p25, p75 = rt_from_errors(errors)
        return cls(
            solver=solver,
            task=task,
            T=list(range(1, len(r) + 1)),
            r=r.tolist(),
            p25=p25.tolist(),
            p75=p75.tolist(),
            best_errors=prefix_minimum(errors).tolist(),
        )


def rt_curve(solver, task: TaskSpec, targets: np.ndarray, T_max: int, seed: int = 0, jobs: int = 1) -> RTCurve:
    """Propose `T_max` designs per target and score them through the true forward model."""
    if T_max < 1:
        raise MetricError(f"T_max must be >= 1, got {T_max}")
    proposals = solver.propose_many(targets, T_max, seed=seed)
    errors = resim_error_matrix(task, targets, [p.designs for p in proposals], jobs=jobs)
    return RTCurve.from_errors(solver.kind, task.name, errors)
