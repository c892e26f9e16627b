"""Real-valued genetic algorithm scored by a frozen forward network.

Each generation: the `elitism` fittest individuals pass unchanged, the rest
of the next population is bred from roulette-wheel parents paired in draw
order, with single-point crossover and per-gene uniform resampling.
"""

from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np

from aembench.autodiff.nn import Mlp
from aembench.errors import ConfigError
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.forward import ForwardNetMixin, forward_spec

logger = logging.getLogger(__name__)

FITNESS_EPS = 1e-9


def fitness(errors: np.ndarray) -> np.ndarray:
    return 1.0 / (np.asarray(errors, dtype=np.float64) + FITNESS_EPS)


def roulette_probabilities(fit: np.ndarray) -> np.ndarray:
    fit = np.asarray(fit, dtype=np.float64)
    total = fit.sum()
    if not total > 0:
        return np.full(fit.size, 1.0 / fit.size)
    return fit / total


def roulette_select(fit: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of `n` parents drawn with probability proportional to fitness."""
    cumulative = np.cumsum(roulette_probabilities(fit))
    draws = rng.random(n)
    return np.minimum(np.searchsorted(cumulative, draws, side="left"), len(cumulative) - 1)


def single_point_crossover(a: np.ndarray, b: np.ndarray, point: int) -> Tuple[np.ndarray, np.ndarray]:
    """Children that swap tails after the first `point` genes."""
    return (
        np.concatenate([a[:point], b[point:]]),
        np.concatenate([b[:point], a[point:]]),
    )


def point_mutation(
    x: np.ndarray, rate: float, rng: np.random.Generator, lo: float = -1.0, hi: float = 1.0
) -> np.ndarray:
    out = x.copy()
    mask = rng.random(out.shape) < rate
    out[mask] = rng.uniform(lo, hi, size=int(mask.sum()))
    return out


@register_solver("ga")
class GeneticSolver(ForwardNetMixin, InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        self.forward = Mlp(forward_spec(task, cfg))

    def networks(self):
        return {"forward": self.forward}

    def _fit(self, g_tr, s_tr, g_val, s_val):
        return self._prepare_forward(g_tr, s_tr, g_val, s_val)

    def load_extra_arrays(self, arrays):
        self.forward.freeze()

    def surrogate_errors(self, population: np.ndarray, target: np.ndarray) -> np.ndarray:
        return np.mean((self.forward.predict(population) - target) ** 2, axis=1)

    def evolve(
        self, target: np.ndarray, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray, List[float]]:
        """Final population, its surrogate errors and the best fitness per generation."""
        cfg = self.cfg
        size, d, k = cfg.population, self.task.d_g, cfg.elitism
        population = rng.uniform(-1.0, 1.0, size=(size, d))
        trace: List[float] = []

        for gen in range(cfg.generations):
            fit = fitness(self.surrogate_errors(population, target))
            trace.append(float(fit.max()))
            ranked = np.argsort(-fit, kind="stable")
            n_children = size - k
            parents = population[roulette_select(fit, n_children + n_children % 2, rng)]

            children = []
            for a, b in zip(parents[0::2], parents[1::2]):
                if d > 1 and rng.random() < cfg.crossover_rate:
                    a, b = single_point_crossover(a, b, int(rng.integers(1, d)))
                children.extend([a, b])
            children = point_mutation(np.array(children[:n_children]), cfg.mutation_rate, rng)
            population = np.vstack([population[ranked[:k]], children])

        errors = self.surrogate_errors(population, target)
        trace.append(float(fitness(errors).max()))
        return population, errors, trace

    def _propose(self, s, n, rng):
        if self.cfg.population < n:
            raise ConfigError(f"GA population {self.cfg.population} is smaller than T={n}")
        population, errors, _ = self.evolve(s, rng)
        order = np.argsort(errors, kind="stable")[:n]
        return population[order], errors[order] * self.spectra.scale**2
