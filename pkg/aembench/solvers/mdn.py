"""Mixture density network: s -> diagonal Gaussian mixture over g."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.nn import Mlp
from aembench.autodiff.tensor import Tensor
from aembench.errors import NumericError
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.losses import mdn_nll
from aembench.solvers.training import fit


def sample_mixture(
    weights: np.ndarray,
    means: np.ndarray,
    variances: np.ndarray,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """`n` draws from one mixture, ordered by component weight then draw order.

    Shapes: weights (K,), means and variances (K, d).
    """
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(np.asarray(variances) <= 0):
        raise NumericError("mixture variances must be positive")
    comps = rng.choice(weights.size, size=n, p=weights / weights.sum())
    draws = means[comps] + np.sqrt(variances[comps]) * rng.standard_normal((n, means.shape[1]))
    order = np.argsort(-weights[comps], kind="stable")
    return draws[order]


@register_solver("mdn")
class MixtureDensitySolver(InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        k, d = cfg.n_components, task.d_g
        self.net = Mlp(cfg.mlp(task.d_s, k * (1 + 2 * d)))

    def networks(self):
        return {"mixture": self.net}

    def mixture(self, s: np.ndarray, mode: str = "eval") -> Tuple[Tensor, Tensor, Tensor]:
        """Weights (B, K), means (B, K, d), variances (B, K, d)."""
        k, d = self.cfg.n_components, self.task.d_g
        out = self.net(s, mode=mode)
        b = out.shape[0]
        logits = out[:, :k]
        log_norm = ad.reshape(ad.logsumexp(logits, axis=-1), (b, 1))
        weights = ad.exp(logits - log_norm)
        means = ad.reshape(out[:, k : k + k * d], (b, k, d))
        variances = ad.softplus(ad.reshape(out[:, k + k * d :], (b, k, d))) + self.cfg.var_floor
        return weights, means, variances

    def _fit(self, g_tr, s_tr, g_val, s_val):
        const = self.cfg.mdn_include_constant

        def batch_loss(idx, rng):
            return mdn_nll(*self.mixture(s_tr[idx], mode="train"), g_tr[idx], include_constant=const)

        def val_loss():
            return mdn_nll(*self.mixture(s_val), g_val, include_constant=const).item()

        return fit([self.net], batch_loss, val_loss, len(g_tr), self.cfg, "mdn")

    def _propose(self, s, n, rng):
        w, mu, var = (t.data[0] for t in self.mixture(s[None, :]))
        return sample_mixture(w, mu, var, n, rng), None
