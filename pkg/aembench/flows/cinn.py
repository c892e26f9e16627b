"""Conditional invertible network: g <-> z given s, with |z| = |g|."""

from __future__ import annotations

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.tensor import ArrayLike, Tensor
from aembench.errors import ConfigError
from aembench.flows.coupling import CouplingFlow, FlowConfig
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.training import fit


def cinn_loss(z: ArrayLike, logdet: ArrayLike) -> Tensor:
    """0.5 * |z|^2 - logdet, averaged over rows."""
    z, logdet = ad.as_tensor(z), ad.as_tensor(logdet)
    if z.ndim == 1:
        return 0.5 * ad.sum_(ad.square(z)) - logdet
    return ad.mean(0.5 * ad.sum_(ad.square(z), axis=-1) - logdet)


@register_solver("cinn")
class ConditionalInvertibleNetSolver(InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        if cfg.flow_latent is not None and cfg.flow_latent != task.d_g:
            raise ConfigError(f"cINN latent width must equal |g|={task.d_g}, got {cfg.flow_latent}")
        self.flow_cfg = FlowConfig.from_solver(cfg, latent=task.d_g)
        self.flow = CouplingFlow(task.d_g, self.flow_cfg, cond_dim=task.d_s)

    def networks(self):
        return self.flow.networks()

    def extra_arrays(self):
        return self.flow.permutation_arrays()

    def load_extra_arrays(self, arrays):
        self.flow.load_permutations(arrays)

    def latents(self, g: np.ndarray, s: np.ndarray) -> np.ndarray:
        """z = f(g | s) for unit designs and standardized spectra."""
        z, _ = self.flow.forward(g, s)
        return z.data

    def _fit(self, g_tr, s_tr, g_val, s_val):
        def batch_loss(idx, rng):
            return cinn_loss(*self.flow.forward(g_tr[idx], s_tr[idx]))

        def val_loss():
            return cinn_loss(*self.flow.forward(g_val, s_val)).item()

        nets = list(self.networks().values())
        return fit(nets, batch_loss, val_loss, len(g_tr), self.cfg, "cinn")

    def _propose(self, s, n, rng):
        z = rng.standard_normal((n, self.task.d_g))
        return self.flow.inverse(z, np.repeat(s[None, :], n, axis=0)), None
