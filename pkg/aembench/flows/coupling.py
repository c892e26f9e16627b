"""Affine coupling blocks and stacked flows.

A block leaves one half of its input untouched and applies an affine map
to the other half, with scale and shift computed from the untouched half
(and an optional condition)::

    y_pass  = x_pass
    y_trans = x_trans * exp(s(x_pass, c)) + t(x_pass, c)
    logdet  = sum(s)

Each block ends with a fixed seeded permutation that shuffles within the two
halves and moves the transformed coordinates to the front. The next block
passes the front half through, so it conditions on what the previous block
changed and transforms the rest. Any two consecutive blocks therefore
transform every coordinate. With two or more blocks, every inverse output
depends on the trailing half of the flow output, where the INN keeps its
latent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from aembench.autodiff import tensor as ad
from aembench.autodiff.nn import Mlp, MlpSpec
from aembench.autodiff.tensor import ArrayLike, Tensor
from aembench.errors import CheckpointError, ConfigError, ShapeError

logger = logging.getLogger(__name__)

PERMUTATION_SEED_OFFSET = 1000


@dataclass(frozen=True)
class FlowConfig:
    n_blocks: int
    hidden: Tuple[int, ...]
    activation: str = "relu"
    clamp: Optional[float] = 2.0
    seed: int = 0
    # INN only
    sigma: float = 0.1
    latent: int = 0
    pad: int = 0

    @classmethod
    def from_solver(cls, cfg, latent: int = 0, pad: int = 0) -> "FlowConfig":
        return cls(
            n_blocks=cfg.n_blocks,
            hidden=tuple(cfg.flow_hidden if cfg.flow_hidden is not None else cfg.hidden),
            activation=cfg.activation,
            clamp=cfg.clamp,
            seed=cfg.seed,
            sigma=cfg.flow_sigma,
            latent=latent,
            pad=pad,
        )


class CouplingBlock:
    def __init__(
        self,
        dim: int,
        cond_dim: int = 0,
        pass_first: bool = True,
        hidden: Sequence[int] = (64, 64),
        activation: str = "relu",
        clamp: Optional[float] = 2.0,
        seed: int = 0,
        permutation: Optional[np.ndarray] = None,
    ):
        if dim < 2:
            raise ConfigError(f"coupling needs at least 2 dimensions, got {dim}")
        half = dim // 2
        first, second = np.arange(half), np.arange(half, dim)
        self.pass_idx, self.trans_idx = (first, second) if pass_first else (second, first)
        self.dim, self.cond_dim, self.clamp = dim, cond_dim, clamp

        n_in, n_out = self.pass_idx.size + cond_dim, self.trans_idx.size
        # No batchnorm: the inverse must see exactly the same subnet outputs.
        self.scale = Mlp(MlpSpec.build(n_in, hidden, n_out, activation, batchnorm=False, seed=seed))
        self.shift = Mlp(MlpSpec.build(n_in, hidden, n_out, activation, batchnorm=False, seed=seed + 1))

        if permutation is None:
            permutation = mixing_permutation(self.pass_idx, self.trans_idx, seed + PERMUTATION_SEED_OFFSET)
        self.set_permutation(permutation)

    def set_permutation(self, permutation: np.ndarray) -> None:
        perm = np.asarray(permutation).astype(np.int64)
        if sorted(perm.tolist()) != list(range(self.dim)):
            raise CheckpointError(f"invalid permutation {perm.tolist()} for width {self.dim}")
        self.permutation = perm
        layout = np.concatenate([self.pass_idx, self.trans_idx])
        # Column j of the output is column gather[j] of [pass, transformed].
        self.gather = np.argsort(layout)[perm]
        self.inverse_permutation = np.argsort(perm)

    def identity(self) -> "CouplingBlock":
        """Zero both subnets' output layers: the block reduces to its permutation."""
        self.scale.zero_last_layer()
        self.shift.zero_last_layer()
        return self

    def _check(self, x_shape, cond_shape):
        if len(x_shape) != 2 or x_shape[1] != self.dim:
            raise ShapeError("coupling", [x_shape], f"expected width {self.dim}")
        if self.cond_dim and (cond_shape is None or cond_shape != (x_shape[0], self.cond_dim)):
            raise ShapeError("coupling", [x_shape, cond_shape], f"expected condition width {self.cond_dim}")
        if not self.cond_dim and cond_shape is not None:
            raise ShapeError("coupling", [x_shape, cond_shape], "block takes no condition")

    def _scale(self, raw):
        if self.clamp is None:
            return raw
        if isinstance(raw, Tensor):
            return ad.soft_clamp(raw, self.clamp)
        return self.clamp * np.tanh(raw / self.clamp)

    def forward(self, x: ArrayLike, cond: Optional[ArrayLike] = None) -> Tuple[Tensor, Tensor]:
        """(y, logdet) with logdet of shape (B,)."""
        x = ad.as_tensor(x)
        cond = None if cond is None else ad.as_tensor(cond)
        self._check(x.shape, None if cond is None else cond.shape)
        x_pass = x[:, self.pass_idx]
        x_trans = x[:, self.trans_idx]
        inp = x_pass if cond is None else ad.concat([x_pass, cond], axis=-1)
        s = self._scale(self.scale(inp))
        t = self.shift(inp)
        y_trans = x_trans * ad.exp(s) + t
        y = ad.concat([x_pass, y_trans], axis=-1)[:, self.gather]
        return y, ad.sum_(s, axis=-1)

    def inverse(self, y: np.ndarray, cond: Optional[np.ndarray] = None) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        self._check(y.shape, None if cond is None else np.shape(cond))
        y = y[:, self.inverse_permutation]
        y_pass, y_trans = y[:, self.pass_idx], y[:, self.trans_idx]
        inp = y_pass if cond is None else np.hstack([y_pass, cond])
        s = self._scale(self.scale.predict(inp))
        t = self.shift.predict(inp)
        x = np.empty_like(y)
        x[:, self.pass_idx] = y_pass
        x[:, self.trans_idx] = (y_trans - t) * np.exp(-s)
        return x


def mixing_permutation(pass_idx: np.ndarray, trans_idx: np.ndarray, seed: int) -> np.ndarray:
    """Shuffled transformed coordinates first, then the shuffled passed ones."""
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.permutation(trans_idx), rng.permutation(pass_idx)])


def coupling_forward(block: CouplingBlock, x: ArrayLike, cond: Optional[ArrayLike] = None):
    return block.forward(x, cond)


def coupling_inverse(block: CouplingBlock, y: np.ndarray, cond: Optional[np.ndarray] = None) -> np.ndarray:
    return block.inverse(y, cond)


class CouplingFlow:
    """A stack of coupling blocks joined by mixing permutations."""

    def __init__(self, dim: int, cfg: FlowConfig, cond_dim: int = 0, identity_init: bool = False):
        self.dim, self.cond_dim = dim, cond_dim
        self.blocks: List[CouplingBlock] = [
            CouplingBlock(
                dim,
                cond_dim,
                pass_first=True,
                hidden=cfg.hidden,
                activation=cfg.activation,
                clamp=cfg.clamp,
                seed=cfg.seed + 2 * i,
            )
            for i in range(cfg.n_blocks)
        ]
        if identity_init:
            for b in self.blocks:
                b.identity()

    def forward(self, x: ArrayLike, cond: Optional[ArrayLike] = None) -> Tuple[Tensor, Tensor]:
        h = ad.as_tensor(x)
        logdet = None
        for block in self.blocks:
            h, ld = block.forward(h, cond)
            logdet = ld if logdet is None else logdet + ld
        return h, logdet

    def inverse(self, y: np.ndarray, cond: Optional[np.ndarray] = None) -> np.ndarray:
        h = np.asarray(y, dtype=np.float64)
        for block in reversed(self.blocks):
            h = block.inverse(h, cond)
        return h

    def networks(self) -> Dict[str, Mlp]:
        nets: Dict[str, Mlp] = {}
        for i, b in enumerate(self.blocks):
            nets[f"block{i}.scale"] = b.scale
            nets[f"block{i}.shift"] = b.shift
        return nets

    def permutation_arrays(self) -> Dict[str, np.ndarray]:
        return {f"block{i}.perm": b.permutation.astype(np.float64) for i, b in enumerate(self.blocks)}

    def load_permutations(self, arrays: Dict[str, np.ndarray]) -> None:
        for i, b in enumerate(self.blocks):
            b.set_permutation(np.rint(arrays[f"block{i}.perm"]))

    def n_parameters(self) -> int:
        return sum(net.n_parameters() for net in self.networks().values())
