"""Adam and a reduce-on-plateau learning-rate scheduler.

The functional forms (`adam_step`, `plateau_step`) operate on an explicit
`OptimState`; `Adam` wraps them for a named parameter dict.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from aembench.autodiff.tensor import Tensor
from aembench.errors import ConfigError, NumericError

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    # Plateau scheduler.
    patience: int = 10
    factor: float = 0.5
    min_lr: float = 0.0
    best_loss: float = float("inf")
    epochs_since_improvement: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 < self.factor < 1.0:
            raise ConfigError(f"plateau factor must be in (0, 1), got {self.factor}")
        if self.patience < 0:
            raise ConfigError(f"plateau patience must be >= 0, got {self.patience}")


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimState,
) -> Dict[str, np.ndarray]:
    """One Adam update with bias correction. Returns new parameter arrays."""
    for name, g in grads.items():
        if np.isnan(g).any():
            raise NumericError(f"NaN gradient for parameter {name!r}")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out: Dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = p
            continue
        if g.shape != p.shape:
            raise NumericError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        out[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


def plateau_step(state: OptimState, epoch_loss: float) -> OptimState:
    """Decay the learning rate after `patience` epochs without improvement."""
    if epoch_loss < state.best_loss:
        state.best_loss = float(epoch_loss)
        state.epochs_since_improvement = 0
        return state

    state.epochs_since_improvement += 1
    if state.epochs_since_improvement >= state.patience:
        new_lr = max(state.lr * state.factor, state.min_lr)
        if new_lr < state.lr:
            logger.debug("plateau: reducing learning rate %.3g -> %.3g", state.lr, new_lr)
            state.lr = new_lr
        state.epochs_since_improvement = 0
    return state


class Adam:
    """Adam over a named dict of leaf tensors."""

    def __init__(self, params: Mapping[str, Tensor], state: OptimState):
        self.params = dict(params)
        self.state = state

    def step(self) -> None:
        arrays = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        updated = adam_step(arrays, grads, self.state)
        for k, p in self.params.items():
            p.data = np.asarray(updated[k], dtype=np.float64)

    def epoch_end(self, epoch_loss: float) -> None:
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite epoch loss {epoch_loss}")
        plateau_step(self.state, epoch_loss)

    @property
    def lr(self) -> float:
        return self.state.lr
