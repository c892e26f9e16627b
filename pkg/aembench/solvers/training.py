"""Minibatch training loop shared by every trainable solver."""

from __future__ import annotations

import logging
import time
from typing import Callable, Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from aembench.autodiff.nn import Mlp
from aembench.autodiff.optim import Adam, OptimState
from aembench.autodiff.tensor import Tensor
from aembench.errors import TrainingError
from aembench.solvers.base import SolverConfig

logger = logging.getLogger(__name__)

BatchLoss = Callable[[np.ndarray, np.random.Generator], Tensor]


class TrainHistory(BaseModel):
    label: str = ""
    train_loss: List[float] = Field(default_factory=list)
    val_loss: List[float] = Field(default_factory=list)
    lr: List[float] = Field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("inf")
    seconds: float = 0.0
    stopped_early: bool = False

    def merged(self, other: "TrainHistory") -> "TrainHistory":
        """Concatenate two stages (e.g. tandem forward + inverse)."""
        return TrainHistory(
            label=f"{self.label}+{other.label}",
            train_loss=self.train_loss + other.train_loss,
            val_loss=self.val_loss + other.val_loss,
            lr=self.lr + other.lr,
            best_epoch=other.best_epoch,
            best_val=other.best_val,
            seconds=self.seconds + other.seconds,
            stopped_early=self.stopped_early or other.stopped_early,
        )


def fit(
    nets: Sequence[Mlp],
    batch_loss: BatchLoss,
    val_loss: Callable[[], float],
    n_rows: int,
    cfg: SolverConfig,
    label: str,
    extra_params: Dict[str, Tensor] = None,
) -> TrainHistory:
    """Adam + reduce-on-plateau over shuffled minibatches.

    The plateau scheduler watches the epoch training loss. The parameters
    with the lowest validation loss are restored at the end.
    """
    params: Dict[str, Tensor] = {}
    for i, net in enumerate(nets):
        params.update({f"{i}.{k}": p for k, p in net.params.items()})
    params.update(extra_params or {})
    opt = Adam(params, OptimState(lr=cfg.lr, patience=cfg.patience, factor=cfg.lr_factor))

    rng = np.random.default_rng(cfg.seed)
    batch = min(cfg.batch_size, n_rows)
    history = TrainHistory(label=label)
    best = [net.named_arrays() for net in nets]
    best_extra = {k: p.data.copy() for k, p in (extra_params or {}).items()}
    start = time.perf_counter()

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_rows)
        losses = []
        for lo in range(0, n_rows, batch):
            idx = order[lo : lo + batch]
            # Batchnorm needs two rows per batch.
            if idx.size < 2:
                continue
            loss = batch_loss(idx, rng)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"{label}: loss became {value} at epoch {epoch}")
            loss.backward()
            opt.step()
            losses.append(value)

        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        val = float(val_loss())
        if not np.isfinite(val):
            raise TrainingError(f"{label}: validation loss became {val} at epoch {epoch}")
        lr_before = opt.lr
        opt.epoch_end(epoch_loss)
        if opt.lr < lr_before:
            logger.debug("%s: lr %.3g -> %.3g at epoch %d", label, lr_before, opt.lr, epoch)

        history.train_loss.append(epoch_loss)
        history.val_loss.append(val)
        history.lr.append(opt.lr)
        logger.debug("%s: epoch %d train %.6g val %.6g", label, epoch, epoch_loss, val)

        if val < history.best_val:
            history.best_val = val
            history.best_epoch = epoch
            best = [net.named_arrays() for net in nets]
            best_extra = {k: p.data.copy() for k, p in (extra_params or {}).items()}

        if cfg.max_seconds is not None and time.perf_counter() - start > cfg.max_seconds:
            history.stopped_early = True
            logger.info("%s: wall-clock cap reached after %d epochs", label, epoch + 1)
            break

    for net, arrays in zip(nets, best):
        net.load_arrays(arrays)
    for k, arr in best_extra.items():
        extra_params[k].data[...] = arr
    history.seconds = time.perf_counter() - start
    logger.info(
        "%s: best val %.6g at epoch %d (%.1fs)", label, history.best_val, history.best_epoch, history.seconds
    )
    return history
