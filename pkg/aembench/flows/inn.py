"""Invertible network: [g, 0-pad] <-> [s, z].

The forward direction simulates; the inverse direction, fed a target
spectrum and a standard-normal latent, proposes designs.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.tensor import ArrayLike, Tensor
from aembench.errors import ConfigError, ShapeError
from aembench.flows.coupling import CouplingFlow, FlowConfig
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.training import fit

logger = logging.getLogger(__name__)


def inn_loss(s_hat: ArrayLike, s: ArrayLike, z: ArrayLike, logdet: ArrayLike, sigma: float) -> Tensor:
    """0.5 * (|s_hat - s|^2 / sigma^2 + |z|^2) - logdet, averaged over rows."""
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    s_hat, z, logdet = ad.as_tensor(s_hat), ad.as_tensor(z), ad.as_tensor(logdet)
    if s_hat.ndim == 1:
        s_hat, z = ad.reshape(s_hat, (1, -1)), ad.reshape(z, (1, -1))
        logdet = ad.reshape(logdet, (1,))
        s = np.reshape(np.asarray(s, dtype=np.float64), (1, -1))
    if s_hat.shape != np.shape(s) or z.shape[0] != s_hat.shape[0] or logdet.shape != (s_hat.shape[0],):
        raise ShapeError("inn_loss", [s_hat.shape, np.shape(s), z.shape, logdet.shape])
    fit_term = ad.sum_(ad.square(s_hat - s), axis=-1) * (1.0 / sigma**2)
    latent = ad.sum_(ad.square(z), axis=-1)
    return ad.mean(0.5 * (fit_term + latent) - logdet)


def inn_dims(d_g: int, d_s: int, latent: int = None, pad: int = None) -> Tuple[int, int]:
    """(latent, pad) satisfying d_g + pad == d_s + latent."""
    if latent is None and pad is None:
        latent = d_g
    if pad is None:
        pad = d_s + latent - d_g
    if latent is None:
        latent = d_g + pad - d_s
    if pad < 0 or latent < 1 or d_g + pad != d_s + latent:
        raise ConfigError(
            f"INN widths do not match: |g|={d_g} + pad={pad} must equal |s|={d_s} + |z|={latent}, "
            "with pad >= 0 and |z| >= 1"
        )
    return latent, pad


@register_solver("inn")
class InvertibleNetSolver(InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        self.latent, self.pad = inn_dims(task.d_g, task.d_s, cfg.flow_latent, cfg.flow_pad)
        self.flow_cfg = FlowConfig.from_solver(cfg, latent=self.latent, pad=self.pad)
        self.flow = CouplingFlow(task.d_g + self.pad, self.flow_cfg)

    def networks(self):
        return self.flow.networks()

    def extra_arrays(self):
        return self.flow.permutation_arrays()

    def load_extra_arrays(self, arrays):
        self.flow.load_permutations(arrays)

    def padded(self, g: np.ndarray) -> np.ndarray:
        return np.hstack([g, np.zeros((len(g), self.pad))])

    def simulate(self, g: np.ndarray) -> np.ndarray:
        """Forward-direction spectrum prediction, standardized units."""
        y, _ = self.flow.forward(self.padded(g))
        return y.data[:, : self.task.d_s]

    def _loss(self, g: np.ndarray, s: np.ndarray) -> Tensor:
        y, logdet = self.flow.forward(self.padded(g))
        d_s = self.task.d_s
        return inn_loss(y[:, :d_s], s, y[:, d_s:], logdet, self.flow_cfg.sigma)

    def _fit(self, g_tr, s_tr, g_val, s_val):
        def batch_loss(idx, rng):
            return self._loss(g_tr[idx], s_tr[idx])

        def val_loss():
            return self._loss(g_val, s_val).item()

        nets = list(self.networks().values())
        return fit(nets, batch_loss, val_loss, len(g_tr), self.cfg, "inn")

    def _propose(self, s, n, rng):
        z = rng.standard_normal((n, self.latent))
        x = self.flow.inverse(np.hstack([np.repeat(s[None, :], n, axis=0), z]))
        return x[:, : self.task.d_g], None
