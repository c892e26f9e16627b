"""Shared fixtures: small tasks, datasets and solver configs."""

import numpy as np
import pytest

from aembench.physics.dataset import generate_dataset
from aembench.physics.tasks import get_task
from aembench.solvers.base import SolverConfig


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def toy():
    return get_task("toy")


@pytest.fixture
def linear():
    return get_task("linear")


@pytest.fixture
def toy_data(toy):
    return generate_dataset(toy, counts=(160, 40, 10), seed=3)


@pytest.fixture
def linear_data(linear):
    return generate_dataset(linear, counts=(160, 40, 10), seed=3)


@pytest.fixture
def tiny_cfg():
    """A few epochs of a small network; enough to exercise every code path."""
    return SolverConfig(
        hidden=[16, 16],
        epochs=3,
        batch_size=32,
        lr=1e-2,
        seed=0,
        na_steps=20,
        na_lr=5e-2,
        population=24,
        generations=5,
        elitism=2,
        n_components=3,
        latent_dim=2,
        n_blocks=2,
        flow_hidden=[16],
    )
