"""Neural adjoint: gradient descent on the design through a frozen f^.

For each target, P >= T random designs are optimized jointly with Adam on
the surrogate re-simulation loss plus the boundary loss. Candidates are
clipped to the box and ranked by their final surrogate error.
"""

from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.nn import Mlp
from aembench.autodiff.optim import Adam, OptimState
from aembench.errors import ConfigError, ShapeError
from aembench.solvers.base import InverseSolver, ProposalSet, register_solver
from aembench.solvers.forward import ForwardNetMixin, forward_spec

logger = logging.getLogger(__name__)


@register_solver("na")
class NeuralAdjointSolver(ForwardNetMixin, InverseSolver):
    def __init__(self, task, cfg):
        super().__init__(task, cfg)
        self.forward = Mlp(forward_spec(task, cfg))

    def networks(self):
        return {"forward": self.forward}

    def _fit(self, g_tr, s_tr, g_val, s_val):
        return self._prepare_forward(g_tr, s_tr, g_val, s_val)

    def load_extra_arrays(self, arrays):
        self.forward.freeze()

    def n_candidates(self, n: int) -> int:
        p = self.cfg.na_candidates or self.cfg.na_candidate_factor * n
        if p < n:
            raise ConfigError(f"neural adjoint needs at least T={n} candidates, got P={p}")
        return p

    def surrogate_errors(self, designs: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Per-row MSE of f^(designs) against targets, standardized units."""
        return np.mean((self.forward.predict(designs) - targets) ** 2, axis=1)

    def optimize(
        self, targets: np.ndarray, n: int, rng: np.random.Generator
    ) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Top-`n` unit designs and surrogate errors for each standardized target."""
        targets = np.atleast_2d(targets)
        m, p, d = targets.shape[0], self.n_candidates(n), self.task.d_g
        rep = np.repeat(targets, p, axis=0)
        x = ad.parameter(rng.uniform(-1.0, 1.0, size=(m * p, d)), name="designs")
        opt = Adam({"designs": x}, OptimState(lr=self.cfg.na_lr))
        w = self.cfg.boundary_weight
        d_s = self.task.d_s

        for step in range(self.cfg.na_steps):
            # Summed over rows so each candidate's gradient is independent of P and m.
            fit_term = ad.sum_(ad.square(self.forward(x) - rep)) * (1.0 / d_s)
            bdy = ad.sum_(ad.relu(ad.abs_(x) - 1.0))
            loss = fit_term + w * bdy
            loss.backward()
            opt.step()
        logger.debug("neural adjoint: %d targets x %d candidates, final loss %.6g", m, p, loss.item())

        final = np.clip(x.data, -1.0, 1.0)
        errors = self.surrogate_errors(final, rep).reshape(m, p)
        final = final.reshape(m, p, d)
        out = []
        for i in range(m):
            order = np.argsort(errors[i], kind="stable")[:n]
            out.append((final[i, order], errors[i, order]))
        return out

    def _propose(self, s, n, rng):
        designs, errors = self.optimize(s[None, :], n, rng)[0]
        return designs, errors * self.spectra.scale**2

    def propose_many(self, targets: np.ndarray, T: int, seed: int = 0) -> List[ProposalSet]:
        """All targets optimized in one batch."""
        if not self.trained:
            return super().propose_many(targets, T, seed)
        targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
        if T < 1:
            raise ConfigError(f"T must be >= 1, got {T}")
        if targets.shape[1] != self.task.d_s:
            raise ShapeError("na.propose_many", [targets.shape], f"targets must have {self.task.d_s} points")
        rng = np.random.default_rng(seed)
        results = self.optimize(self.spectra.transform(targets), T, rng)
        return [
            ProposalSet(
                target=s,
                designs=self.task.clip(self.designs.from_unit(u)),
                predicted_errors=err * self.spectra.scale**2,
            )
            for s, (u, err) in zip(targets, results)
        ]
