"""Conditional VAE: encoder q(z | g, s), decoder p(g | z, s)."""

from __future__ import annotations

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.nn import Mlp
from aembench.solvers.base import InverseSolver, register_solver
from aembench.solvers.losses import mse, vae_kl
from aembench.solvers.training import fit


@register_solver("vae")
class ConditionalVaeSolver(InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        latent = cfg.latent_dim
        self.encoder = Mlp(cfg.mlp(task.d_g + task.d_s, 2 * latent))
        self.decoder = Mlp(cfg.mlp(latent + task.d_s, task.d_g, seed_offset=1))

    def networks(self):
        return {"encoder": self.encoder, "decoder": self.decoder}

    def _fit(self, g_tr, s_tr, g_val, s_val):
        latent, alpha = self.cfg.latent_dim, self.cfg.kl_weight

        def batch_loss(idx, rng):
            g, s = g_tr[idx], s_tr[idx]
            h = self.encoder(np.hstack([g, s]), mode="train")
            mu, logvar = h[:, :latent], h[:, latent:]
            # Reparameterization: z = mu + sigma * eps.
            eps = rng.standard_normal((len(idx), latent))
            z = mu + ad.exp(logvar * 0.5) * eps
            recon = self.decoder(ad.concat([z, s], axis=-1), mode="train")
            return mse(recon, g) + alpha * vae_kl(mu, logvar)

        def val_loss():
            h = self.encoder.predict(np.hstack([g_val, s_val]))
            mu, logvar = h[:, :latent], h[:, latent:]
            recon = self.decoder.predict(np.hstack([mu, s_val]))
            kl = -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar), axis=-1).mean()
            return float(np.mean((recon - g_val) ** 2) + alpha * kl)

        return fit([self.encoder, self.decoder], batch_loss, val_loss, len(g_tr), self.cfg, "vae")

    def _propose(self, s, n, rng):
        z = rng.standard_normal((n, self.cfg.latent_dim))
        return self.decoder.predict(np.hstack([z, np.repeat(s[None, :], n, axis=0)])), None
