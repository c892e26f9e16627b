"""Non-uniqueness measures: gamma, D_r and nearest-spectra clusters."""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from aembench.errors import MetricError
from aembench.physics.tasks import TaskSpec

logger = logging.getLogger(__name__)

# gamma = r1(NN) / r1(NA); larger means more one-to-many.
GAMMA_CONVENTION = "r1(nn) / r1(na)"


def gamma(r_nn_1: float, r_na_1: float) -> float:
    if not (r_nn_1 > 0 and r_na_1 > 0):
        raise MetricError(f"gamma needs positive errors, got r_nn={r_nn_1}, r_na={r_na_1}")
    return float(r_nn_1 / r_na_1)


def normalize_designs(designs: np.ndarray, task: Optional[TaskSpec]) -> np.ndarray:
    designs = np.asarray(designs, dtype=np.float64)
    if task is None:
        return designs
    return (designs - task.lo) / task.r_g


def mean_pairwise_sq_distance(points: np.ndarray) -> float:
    """Mean of |x_i - x_j|^2 over ordered pairs i != j.

    Uses sum_{i != j} |x_i - x_j|^2 = 2 N sum_i |x_i - mean|^2.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if n < 2:
        raise MetricError(f"need at least 2 points for a pairwise distance, got {n}")
    centered = points - points.mean(axis=0)
    return float(2.0 * np.sum(centered**2) / (n - 1))


def d_r(
    designs: np.ndarray,
    clusters: Sequence[np.ndarray],
    task: Optional[TaskSpec] = None,
) -> float:
    """Within-cluster over all-pairs mean squared design distance.

    `clusters` holds (K, d_g) design arrays. With `task`, designs are first
    mapped to [0, 1] per dimension by the task bounds.
    """
    if len(clusters) == 0:
        raise MetricError("d_r needs at least one cluster")
    everything = mean_pairwise_sq_distance(normalize_designs(designs, task))
    if everything == 0:
        raise MetricError("d_r undefined: all dataset designs are identical")
    within = np.mean([mean_pairwise_sq_distance(normalize_designs(c, task)) for c in clusters])
    return float(within / everything)


def nearest_spectra(
    spectra: np.ndarray, query: np.ndarray, k: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Row indices and distances of the `k` spectra closest to `query`; ties go to the lower row."""
    spectra = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
    if not 0 < k < len(spectra):
        raise MetricError(f"k must be in [1, {len(spectra) - 1}], got {k}")
    dist = np.sqrt(np.sum((spectra - np.asarray(query, dtype=np.float64)) ** 2, axis=1))
    idx = np.argsort(dist, kind="stable")[:k]
    return idx, dist[idx]


def spectra_clusters(
    spectra: np.ndarray,
    n_clusters: int = 5,
    size: int = 5,
    seed: int = 0,
) -> List[np.ndarray]:
    """Row-index clusters: a random anchor row plus its `size - 1` nearest neighbours by spectrum."""
    spectra = np.atleast_2d(spectra)
    if size < 2 or size >= len(spectra):
        raise MetricError(f"cluster size must be in [2, {len(spectra) - 1}], got {size}")
    rng = np.random.default_rng(seed)
    anchors = rng.choice(len(spectra), size=min(n_clusters, len(spectra)), replace=False)
    clusters = []
    for a in anchors:
        dist = np.sqrt(np.sum((spectra - spectra[a]) ** 2, axis=1))
        dist[a] = -1.0  # anchor first even if another row duplicates it
        clusters.append(np.argsort(dist, kind="stable")[:size])
    return clusters
