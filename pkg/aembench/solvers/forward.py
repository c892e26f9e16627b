"""The forward network f^: unit design -> standardized spectrum.

Tandem, neural adjoint and the genetic algorithm share this trainer, and
NA/GA can reuse a forward network from any checkpoint that stores one.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from aembench.autodiff.nn import Mlp, MlpSpec
from aembench.errors import CheckpointError
from aembench.physics.tasks import TaskSpec
from aembench.solvers.base import SolverConfig, SpectrumScaler, load_solver
from aembench.solvers.losses import mse
from aembench.solvers.training import TrainHistory, fit

logger = logging.getLogger(__name__)

FORWARD_SEED_OFFSET = 101


def forward_spec(task: TaskSpec, cfg: SolverConfig) -> MlpSpec:
    return cfg.mlp(task.d_g, task.d_s, cfg.forward_hidden, seed_offset=FORWARD_SEED_OFFSET)


def train_forward(
    net: Mlp,
    g_tr: np.ndarray,
    s_tr: np.ndarray,
    g_val: np.ndarray,
    s_val: np.ndarray,
    cfg: SolverConfig,
    label: str = "forward",
) -> TrainHistory:
    def batch_loss(idx, rng):
        return mse(net(g_tr[idx], mode="train"), s_tr[idx])

    def val_loss():
        return float(np.mean((net.predict(g_val) - s_val) ** 2))

    return fit([net], batch_loss, val_loss, len(g_tr), cfg, label)


def load_forward(path: str, task: TaskSpec, target_scaler: Optional[SpectrumScaler] = None) -> Mlp:
    """Forward network stored in a solver checkpoint, re-expressed in `target_scaler` units.

    The output affine map of the stored network is folded into its last
    layer so the returned network predicts spectra standardized by
    `target_scaler` instead of by the scaler it was trained with.
    """
    solver = load_solver(path)
    net = solver.networks().get("forward")
    if net is None:
        raise CheckpointError(f"checkpoint {path} ({solver.kind}) holds no forward network")
    if (solver.task.d_g, solver.task.d_s) != (task.d_g, task.d_s):
        raise CheckpointError(
            f"forward network in {path} maps {solver.task.d_g} -> {solver.task.d_s}, "
            f"task {task.name!r} needs {task.d_g} -> {task.d_s}"
        )
    if target_scaler is not None:
        src = solver.spectra
        a = src.scale / target_scaler.scale
        c = (src.shift - target_scaler.shift) / target_scaler.scale
        last = net.spec.n_layers - 1
        net.params[f"W{last}"].data *= a
        net.params[f"b{last}"].data = net.params[f"b{last}"].data * a + c
    logger.info("loaded forward network from %s", path)
    return net


class ForwardNetMixin:
    """Trains or loads `self.forward`, then freezes it."""

    forward: Mlp

    def _prepare_forward(self, g_tr, s_tr, g_val, s_val) -> TrainHistory:
        cfg: SolverConfig = self.cfg  # type: ignore[attr-defined]
        if cfg.forward_checkpoint:
            net = load_forward(cfg.forward_checkpoint, self.task, self.spectra)  # type: ignore[attr-defined]
            hidden = list(net.spec.widths[1:-1])
            expected = forward_spec(self.task, cfg.model_copy(update={"forward_hidden": hidden}))  # type: ignore[attr-defined]
            if (expected.activations, expected.batchnorm) != (net.spec.activations, net.spec.batchnorm):
                raise CheckpointError(
                    f"forward network in {cfg.forward_checkpoint} uses a different activation or batchnorm setting"
                )
            # Later reloads of this solver rebuild a forward net of the loaded shape.
            self.cfg = cfg.model_copy(update={"forward_hidden": hidden})
            self.forward = net
            history = TrainHistory(label="forward (loaded)")
            history.best_val = float(np.mean((self.forward.predict(g_val) - s_val) ** 2))
        else:
            history = train_forward(self.forward, g_tr, s_tr, g_val, s_val, cfg)
        self.forward.freeze()
        return history
