"""Tandem network: a frozen forward model behind a trainable inverse.

Stage 1 fits f^ on (g, s). Stage 2 freezes it and trains the inverse net
through it on the re-simulation loss plus the boundary loss. The
forward-net fingerprint is checked after stage 2.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from aembench.autodiff.nn import Mlp
from aembench.errors import TrainingError
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.forward import ForwardNetMixin, forward_spec
from aembench.solvers.losses import boundary_loss, mse
from aembench.solvers.training import TrainHistory, fit

logger = logging.getLogger(__name__)

# Unit box [-1, 1]: center 0, range 2.
_MU = 0.0
_RANGE = 2.0


@register_solver("tandem")
class TandemSolver(ForwardNetMixin, InverseSolver):
    deterministic = True

    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        self.forward = Mlp(forward_spec(task, cfg))
        self.inverse = Mlp(cfg.mlp(task.d_s, task.d_g, seed_offset=1))
        self.forward_fingerprint: Optional[str] = None

    def networks(self):
        return {"forward": self.forward, "inverse": self.inverse}

    def train_forward_stage(self, g_tr, s_tr, g_val, s_val) -> TrainHistory:
        history = self._prepare_forward(g_tr, s_tr, g_val, s_val)
        self.forward_fingerprint = self.forward.fingerprint()
        return history

    def train_inverse_stage(self, s_tr, s_val) -> TrainHistory:
        if self.forward_fingerprint is None or not self.forward.frozen:
            raise TrainingError("tandem stage 2 needs a trained, frozen forward network (run stage 1 first)")
        bounds_mu = np.full(self.task.d_g, _MU)
        bounds_r = np.full(self.task.d_g, _RANGE)
        w = self.cfg.boundary_weight

        def batch_loss(idx, rng):
            g_hat = self.inverse(s_tr[idx], mode="train")
            return mse(self.forward(g_hat), s_tr[idx]) + w * boundary_loss(g_hat, bounds_mu, bounds_r)

        def val_loss():
            g_hat = self.inverse.predict(s_val)
            return float(np.mean((self.forward.predict(g_hat) - s_val) ** 2))

        history = fit([self.inverse], batch_loss, val_loss, len(s_tr), self.cfg, "tandem")
        if self.forward.fingerprint() != self.forward_fingerprint:
            raise TrainingError("forward network changed during tandem stage 2")
        return history

    def _fit(self, g_tr, s_tr, g_val, s_val):
        first = self.train_forward_stage(g_tr, s_tr, g_val, s_val)
        return first.merged(self.train_inverse_stage(s_tr, s_val))

    def load_extra_arrays(self, arrays):
        self.forward.freeze()
        self.forward_fingerprint = self.forward.fingerprint()

    def _propose(self, s, n, rng):
        g = self.inverse.predict(s[None, :])
        return np.repeat(g, n, axis=0), None
