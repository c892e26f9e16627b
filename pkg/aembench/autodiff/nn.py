"""Multilayer perceptrons with optional batch normalization.

Each layer is affine -> (batchnorm) -> activation. Parameters live in a flat
``name -> Tensor`` dict so optimizers, checkpoints and hashes all work off
the same mapping.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np

from aembench.autodiff import tensor as T
from aembench.autodiff.tensor import Tensor
from aembench.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

Activation = Literal["relu", "tanh", "linear"]
Mode = Literal["train", "eval"]

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of an MLP.

    `widths` includes the input width, so a spec with widths ``[4, 16, 2]``
    has two layers. `activations` and `batchnorm` have one entry per layer.
    """

    widths: Tuple[int, ...]
    activations: Tuple[Activation, ...]
    batchnorm: Tuple[bool, ...]
    seed: int = 0

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("MlpSpec needs at least one layer")
        if any(w <= 0 for w in self.widths):
            raise ConfigError(f"MlpSpec widths must be positive: {self.widths}")
        n = len(self.widths) - 1
        if len(self.activations) != n or len(self.batchnorm) != n:
            raise ConfigError(
                f"MlpSpec has {n} layers but {len(self.activations)} activations "
                f"and {len(self.batchnorm)} batchnorm flags"
            )
        for a in self.activations:
            if a not in ("relu", "tanh", "linear"):
                raise ConfigError(f"unknown activation {a!r}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @classmethod
    def build(
        cls,
        n_in: int,
        hidden: Sequence[int],
        n_out: int,
        activation: Activation = "relu",
        batchnorm: bool = True,
        seed: int = 0,
    ) -> "MlpSpec":
        """Hidden layers share one activation/batchnorm; the output layer is linear."""
        widths = (n_in, *hidden, n_out)
        n_hidden = len(hidden)
        return cls(
            widths=tuple(int(w) for w in widths),
            activations=tuple([activation] * n_hidden + ["linear"]),
            batchnorm=tuple([bool(batchnorm)] * n_hidden + [False]),
            seed=seed,
        )


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(spec: MlpSpec) -> Dict[str, Tensor]:
    rng = np.random.default_rng(spec.seed)
    params: Dict[str, Tensor] = {}
    for i in range(spec.n_layers):
        fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
        params[f"W{i}"] = T.parameter(xavier_uniform(rng, fan_in, fan_out), name=f"W{i}")
        params[f"b{i}"] = T.parameter(np.zeros(fan_out), name=f"b{i}")
        if spec.batchnorm[i]:
            params[f"gamma{i}"] = T.parameter(np.ones(fan_out), name=f"gamma{i}")
            params[f"beta{i}"] = T.parameter(np.zeros(fan_out), name=f"beta{i}")
    return params


def init_buffers(spec: MlpSpec) -> Dict[str, np.ndarray]:
    buffers: Dict[str, np.ndarray] = {}
    for i in range(spec.n_layers):
        if spec.batchnorm[i]:
            buffers[f"running_mean{i}"] = np.zeros(spec.widths[i + 1])
            buffers[f"running_var{i}"] = np.ones(spec.widths[i + 1])
    return buffers


def _activate(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return T.relu(x)
    if kind == "tanh":
        return T.tanh(x)
    return x


def batchnorm(
    h: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: Mode,
) -> Tensor:
    """Normalize per feature; in train mode updates running stats in place."""
    if mode == "train":
        if h.shape[0] < 2:
            raise ShapeError("batchnorm", [h.shape], "train mode needs batch size >= 2")
        mu = T.mean(h, axis=0, keepdims=True)
        centered = h - mu
        var = T.mean(T.square(centered), axis=0, keepdims=True)
        normed = centered * T.power(var + BN_EPS, -0.5)
        running_mean *= 1.0 - BN_MOMENTUM
        running_mean += BN_MOMENTUM * mu.data.reshape(-1)
        running_var *= 1.0 - BN_MOMENTUM
        running_var += BN_MOMENTUM * var.data.reshape(-1)
    else:
        normed = (h - running_mean) * (1.0 / np.sqrt(running_var + BN_EPS))
    return normed * gamma + beta


def mlp_apply(
    spec: MlpSpec,
    params: Dict[str, Tensor],
    x: Tensor,
    mode: Mode = "eval",
    buffers: Optional[Dict[str, np.ndarray]] = None,
) -> Tensor:
    x = T.as_tensor(x)
    if x.ndim != 2 or x.shape[-1] != spec.widths[0]:
        raise ShapeError("mlp_apply", [x.shape], f"expected last dimension {spec.widths[0]}")
    if buffers is None:
        buffers = init_buffers(spec)
    h = x
    for i in range(spec.n_layers):
        h = h @ params[f"W{i}"] + params[f"b{i}"]
        if spec.batchnorm[i]:
            h = batchnorm(
                h,
                params[f"gamma{i}"],
                params[f"beta{i}"],
                buffers[f"running_mean{i}"],
                buffers[f"running_var{i}"],
                mode,
            )
        h = _activate(h, spec.activations[i])
    return h


class Mlp:
    """Parameters, batchnorm buffers and a spec, bundled."""

    def __init__(self, spec: MlpSpec):
        self.spec = spec
        self.params = init_params(spec)
        self.buffers = init_buffers(spec)
        self.frozen = False

    def __call__(self, x, mode: Mode = "eval") -> Tensor:
        if self.frozen:
            mode = "eval"
        return mlp_apply(self.spec, self.params, x, mode, self.buffers)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward pass on plain arrays, no graph."""
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2 or h.shape[-1] != self.spec.widths[0]:
            raise ShapeError("mlp_apply", [h.shape], f"expected last dimension {self.spec.widths[0]}")
        for i in range(self.spec.n_layers):
            h = h @ self.params[f"W{i}"].data + self.params[f"b{i}"].data
            if self.spec.batchnorm[i]:
                h = (h - self.buffers[f"running_mean{i}"]) / np.sqrt(
                    self.buffers[f"running_var{i}"] + BN_EPS
                )
                h = h * self.params[f"gamma{i}"].data + self.params[f"beta{i}"].data
            act = self.spec.activations[i]
            if act == "relu":
                h = np.maximum(h, 0.0)
            elif act == "tanh":
                h = np.tanh(h)
        return h

    def freeze(self) -> "Mlp":
        self.frozen = True
        for p in self.params.values():
            p.requires_grad = False
        return self

    def parameters(self) -> Iterator[Tensor]:
        return iter(self.params.values())

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_last_layer(self) -> "Mlp":
        last = self.spec.n_layers - 1
        self.params[f"W{last}"].data[...] = 0.0
        self.params[f"b{last}"].data[...] = 0.0
        return self

    # ------------------------------------------------------------------
    # Snapshots
    # ------------------------------------------------------------------
    def named_arrays(self, prefix: str = "") -> Dict[str, np.ndarray]:
        out = {f"{prefix}{k}": p.data.copy() for k, p in self.params.items()}
        out.update({f"{prefix}{k}": v.copy() for k, v in self.buffers.items()})
        return out

    def load_arrays(self, arrays: Dict[str, np.ndarray], prefix: str = "") -> "Mlp":
        for k, p in self.params.items():
            src = arrays[f"{prefix}{k}"]
            if src.shape != p.shape:
                raise ShapeError("load", [p.shape, src.shape], f"parameter {prefix}{k}")
            p.data[...] = src
        for k, v in self.buffers.items():
            v[...] = arrays[f"{prefix}{k}"]
        return self

    def fingerprint(self) -> str:
        """sha256 over parameters and buffers; equal iff bit-identical."""
        h = hashlib.sha256()
        for k, v in sorted(self.named_arrays().items()):
            h.update(k.encode())
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()


def snapshot(params: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def restore(params: Dict[str, Tensor], snap: Dict[str, np.ndarray]) -> None:
    for k, p in params.items():
        p.data[...] = snap[k]
