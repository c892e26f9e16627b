"""Affine-coupling flows and the INN / cINN solvers."""

from aembench.flows.cinn import ConditionalInvertibleNetSolver, cinn_loss
from aembench.flows.coupling import (
    CouplingBlock,
    CouplingFlow,
    FlowConfig,
    coupling_forward,
    coupling_inverse,
)
from aembench.flows.inn import InvertibleNetSolver, inn_dims, inn_loss

__all__ = [
    "ConditionalInvertibleNetSolver",
    "CouplingBlock",
    "CouplingFlow",
    "FlowConfig",
    "InvertibleNetSolver",
    "cinn_loss",
    "coupling_forward",
    "coupling_inverse",
    "inn_dims",
    "inn_loss",
]
