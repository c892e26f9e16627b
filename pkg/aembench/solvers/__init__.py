"""Inverse solvers behind one train/propose interface."""

from aembench.solvers.base import (
    SOLVERS,
    InverseSolver,
    ProposalSet,
    SolverConfig,
    load_solver,
    make_solver,
    read_manifest,
    register_solver,
    solver_config,
)
from aembench.solvers.genetic import GeneticSolver
from aembench.solvers.mdn import MixtureDensitySolver
from aembench.solvers.neural_adjoint import NeuralAdjointSolver
from aembench.solvers.neural_net import NeuralNetSolver
from aembench.solvers.tandem import TandemSolver
from aembench.solvers.vae import ConditionalVaeSolver

__all__ = [
    "SOLVERS",
    "ConditionalVaeSolver",
    "GeneticSolver",
    "InverseSolver",
    "MixtureDensitySolver",
    "NeuralAdjointSolver",
    "NeuralNetSolver",
    "ProposalSet",
    "SolverConfig",
    "TandemSolver",
    "load_solver",
    "make_solver",
    "read_manifest",
    "register_solver",
    "solver_config",
]
