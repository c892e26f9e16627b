"""Direct regression s -> g (NN)."""

from __future__ import annotations

import numpy as np

from aembench.autodiff.nn import Mlp
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.losses import mse
from aembench.solvers.training import fit


@register_solver("nn")
class NeuralNetSolver(InverseSolver):
    deterministic = True

    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        self.inverse = Mlp(cfg.mlp(task.d_s, task.d_g))

    def networks(self):
        return {"inverse": self.inverse}

    def _fit(self, g_tr, s_tr, g_val, s_val):
        def batch_loss(idx, rng):
            return mse(self.inverse(s_tr[idx], mode="train"), g_tr[idx])

        def val_loss():
            return float(np.mean((self.inverse.predict(s_val) - g_val) ** 2))

        return fit([self.inverse], batch_loss, val_loss, len(g_tr), self.cfg, "nn")

    def _propose(self, s, n, rng):
        g = self.inverse.predict(s[None, :])
        return np.repeat(g, n, axis=0), None
