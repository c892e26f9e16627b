"""Reverse-mode autodiff, MLPs and optimizers."""

from aembench.autodiff.nn import Mlp, MlpSpec, mlp_apply
from aembench.autodiff.optim import Adam, OptimState, adam_step, plateau_step
from aembench.autodiff.tensor import Tensor, forward_graph, parameter

__all__ = [
    "Adam",
    "Mlp",
    "MlpSpec",
    "OptimState",
    "Tensor",
    "adam_step",
    "forward_graph",
    "mlp_apply",
    "parameter",
    "plateau_step",
]
