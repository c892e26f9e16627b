"""Neural surrogates standing in for an expensive simulator.

A surrogate checkpoint is an IBCHK file holding an MLP under the ``net.``
prefix plus the affine maps between physical units and network units::

    s = out_shift + out_scale * net((g - in_shift) / in_scale)

A JSON manifest next to it (``<checkpoint>.json``) records the MLP
architecture and the `TaskSpec` the surrogate serves.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from aembench.autodiff import checkpoint
from aembench.autodiff.nn import Mlp, MlpSpec
from aembench.errors import CheckpointError, MissingArtifactError
from aembench.physics.dataset import manifest_path
from aembench.physics.tasks import TaskSpec, check_bounds

logger = logging.getLogger(__name__)


class SurrogateManifest(BaseModel):
    task: TaskSpec
    widths: List[int]
    activations: List[str]
    batchnorm: List[bool]
    seed: int = 0
    source: str = ""


class SurrogateModel:
    def __init__(
        self,
        mlp: Mlp,
        task: TaskSpec,
        in_shift: np.ndarray,
        in_scale: np.ndarray,
        out_shift: np.ndarray,
        out_scale: np.ndarray,
    ):
        if mlp.spec.widths[0] != task.d_g or mlp.spec.widths[-1] != task.d_s:
            raise CheckpointError(
                f"surrogate maps {mlp.spec.widths[0]} -> {mlp.spec.widths[-1]} "
                f"but task {task.name!r} is {task.d_g} -> {task.d_s}"
            )
        self.mlp = mlp
        self.task = task
        self.in_shift = np.broadcast_to(np.asarray(in_shift, dtype=np.float64), (task.d_g,)).copy()
        self.in_scale = np.broadcast_to(np.asarray(in_scale, dtype=np.float64), (task.d_g,)).copy()
        self.out_shift = np.broadcast_to(np.asarray(out_shift, dtype=np.float64), (task.d_s,)).copy()
        self.out_scale = np.broadcast_to(np.asarray(out_scale, dtype=np.float64), (task.d_s,)).copy()

    def predict(self, designs: np.ndarray) -> np.ndarray:
        g = np.atleast_2d(np.asarray(designs, dtype=np.float64))
        if g.shape[-1] != self.task.d_g:
            raise CheckpointError(f"design width {g.shape[-1]} != surrogate input width {self.task.d_g}")
        h = self.mlp.predict((g - self.in_shift) / self.in_scale)
        return self.out_shift + self.out_scale * h

    def arrays(self) -> dict:
        out = self.mlp.named_arrays("net.")
        out.update(
            {
                "in_shift": self.in_shift,
                "in_scale": self.in_scale,
                "out_shift": self.out_shift,
                "out_scale": self.out_scale,
            }
        )
        return out


def save_surrogate(path: Union[str, Path], model: SurrogateModel, source: str = "") -> Path:
    path = Path(path)
    checkpoint.save(path, model.arrays())
    spec = model.mlp.spec
    manifest = SurrogateManifest(
        task=model.task.model_copy(update={"surrogate_checkpoint": str(path)}),
        widths=list(spec.widths),
        activations=list(spec.activations),
        batchnorm=list(spec.batchnorm),
        seed=spec.seed,
        source=source,
    )
    manifest_path(path).write_text(manifest.model_dump_json(indent=2))
    load_surrogate.cache_clear()
    return path


def _read_manifest(path: Path) -> SurrogateManifest:
    mpath = manifest_path(path)
    if not mpath.exists():
        raise MissingArtifactError(f"surrogate manifest not found: {mpath}")
    return SurrogateManifest.model_validate_json(mpath.read_text())


@lru_cache(maxsize=8)
def _load_cached(path: str, mtime: float) -> SurrogateModel:
    p = Path(path)
    manifest = _read_manifest(p)
    arrays = checkpoint.load(p)
    spec = MlpSpec(
        widths=tuple(manifest.widths),
        activations=tuple(manifest.activations),
        batchnorm=tuple(manifest.batchnorm),
        seed=manifest.seed,
    )
    try:
        mlp = Mlp(spec).load_arrays(arrays, "net.")
        return SurrogateModel(
            mlp,
            manifest.task,
            arrays["in_shift"],
            arrays["in_scale"],
            arrays["out_shift"],
            arrays["out_scale"],
        )
    except KeyError as e:
        raise CheckpointError(f"surrogate checkpoint {p} is missing tensor {e}") from None
    except ValueError as e:
        raise CheckpointError(f"surrogate checkpoint {p}: {e}") from None


def load_surrogate(path: Union[str, Path]) -> SurrogateModel:
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"surrogate checkpoint not found: {p}")
    return _load_cached(str(p.resolve()), p.stat().st_mtime)


load_surrogate.cache_clear = _load_cached.cache_clear  # type: ignore[attr-defined]


def surrogate_task(path: Union[str, Path]) -> TaskSpec:
    manifest = _read_manifest(Path(path))
    return manifest.task.model_copy(update={"surrogate_checkpoint": str(path)})


def simulate_surrogate(
    g: np.ndarray,
    checkpoint_path: Union[str, Path],
    task: Optional[TaskSpec] = None,
) -> np.ndarray:
    model = load_surrogate(checkpoint_path)
    if task is not None and (task.d_g != model.task.d_g or task.d_s != model.task.d_s):
        raise CheckpointError(
            f"checkpoint {checkpoint_path} serves {model.task.d_g} -> {model.task.d_s}, "
            f"task {task.name!r} needs {task.d_g} -> {task.d_s}"
        )
    g = check_bounds(task or model.task, g)
    return model.predict(g)[0]


def reference_surrogate(
    task: TaskSpec,
    seed: int = 0,
    hidden: Sequence[int] = (64, 64),
) -> SurrogateModel:
    """Seeded random MLP used as the true model when no trained checkpoint exists.

    Output is centred on 0.5 so the spectra look like absorptivities.
    """
    spec = MlpSpec.build(task.d_g, hidden, task.d_s, activation="tanh", batchnorm=False, seed=seed)
    mlp = Mlp(spec)
    rng = np.random.default_rng(seed + 1)
    for i in range(spec.n_layers):
        mlp.params[f"b{i}"].data[...] = rng.normal(0.0, 0.5, size=spec.widths[i + 1])
    logger.info("built reference surrogate for %s (seed=%d)", task.name, seed)
    return SurrogateModel(mlp, task, task.mu_g, task.r_g / 2.0, 0.5, 0.25)
