"""Loss terms used by the inverse solvers."""

from __future__ import annotations

import numpy as np

from aembench.autodiff import tensor as T
from aembench.autodiff.tensor import ArrayLike, Tensor
from aembench.errors import NumericError, ShapeError

LOG_2PI = float(np.log(2.0 * np.pi))


def mse(pred: ArrayLike, target: ArrayLike) -> Tensor:
    return T.mean(T.square(T.as_tensor(pred) - target))


def boundary_loss(g: ArrayLike, mu: ArrayLike, r: ArrayLike) -> Tensor:
    """Sum over dimensions of relu(|g - mu| - r/2); batches are averaged over rows."""
    g = T.as_tensor(g)
    mu, r = np.asarray(mu, dtype=np.float64), np.asarray(r, dtype=np.float64)
    if g.shape[-1] != mu.shape[-1] or mu.shape != r.shape:
        raise ShapeError("boundary_loss", [g.shape, mu.shape, r.shape])
    excess = T.relu(T.abs_(g - mu) - r / 2.0)
    per_row = T.sum_(excess, axis=-1)
    return T.mean(per_row) if g.ndim > 1 else per_row


def mdn_nll(
    weights: ArrayLike,
    means: ArrayLike,
    variances: ArrayLike,
    g: ArrayLike,
    include_constant: bool = True,
) -> Tensor:
    """Mean negative log-likelihood of `g` under diagonal Gaussian mixtures.

    Shapes: weights (B, K), means and variances (B, K, d), g (B, d).
    """
    weights, means, variances = T.as_tensor(weights), T.as_tensor(means), T.as_tensor(variances)
    g = T.as_tensor(g)
    if np.any(variances.data <= 0):
        raise NumericError("mixture variances must be positive")
    b, k, d = means.shape
    if weights.shape != (b, k) or variances.shape != (b, k, d) or g.shape != (b, d):
        raise ShapeError("mdn_nll", [weights.shape, means.shape, variances.shape, g.shape])

    diff = T.reshape(g, (b, 1, d)) - means
    log_comp = -0.5 * T.sum_(T.square(diff) / variances + T.log(variances), axis=-1)
    if include_constant:
        log_comp = log_comp - 0.5 * d * LOG_2PI
    return -T.mean(T.logsumexp(T.log(weights) + log_comp, axis=-1))


def vae_kl(mu: ArrayLike, logvar: ArrayLike) -> Tensor:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over latents, averaged over rows."""
    mu, logvar = T.as_tensor(mu), T.as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeError("vae_kl", [mu.shape, logvar.shape])
    per_row = -0.5 * T.sum_(1.0 + logvar - T.square(mu) - T.exp(logvar), axis=-1)
    return T.mean(per_row) if mu.ndim > 1 else per_row
