"""Common interface of the inverse solvers.

Every solver maps a target spectrum to an ordered list of candidate
designs. Internally designs live in unit coordinates ([-1, 1] per
dimension over the task bounds) and spectra are standardized with one
scalar shift/scale fitted on the training split; `propose` converts back
and clips to the task bounds.
"""

from __future__ import annotations

import abc
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, ClassVar, Dict, List, Optional, Tuple, Type, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from aembench.autodiff import checkpoint
from aembench.autodiff.nn import Mlp, MlpSpec
from aembench.errors import CheckpointError, ConfigError, MissingArtifactError, ShapeError, TrainingError
from aembench.physics.dataset import Dataset, manifest_path
from aembench.physics.tasks import TaskSpec

logger = logging.getLogger(__name__)

SOLVER_KINDS = ("nn", "tandem", "na", "ga", "mdn", "vae", "inn", "cinn")


class SolverConfig(BaseModel):
    """Hyperparameters of one solver run. Unused fields are ignored by a solver."""

    kind: str = "nn"

    # Shared
    hidden: List[int] = Field(default_factory=lambda: [64, 64, 64])
    activation: str = "relu"
    batchnorm: bool = True
    lr: float = Field(1e-3, gt=0)
    epochs: int = Field(300, ge=1)
    batch_size: int = Field(1024, ge=1)
    seed: int = 0
    patience: int = Field(10, ge=0)
    lr_factor: float = Field(0.5, gt=0, lt=1)
    boundary_weight: float = Field(1.0, ge=0)
    max_seconds: Optional[float] = Field(None, gt=0)

    # Forward network (TD, NA, GA)
    forward_checkpoint: Optional[str] = None
    forward_hidden: Optional[List[int]] = None

    # Neural adjoint
    na_steps: int = Field(300, ge=1)
    na_lr: float = Field(1e-2, gt=0)
    na_candidates: Optional[int] = Field(None, ge=1)
    na_candidate_factor: int = Field(4, ge=1)

    # Genetic algorithm
    population: int = Field(256, ge=2)
    generations: int = Field(100, ge=1)
    crossover_rate: float = Field(0.8, ge=0, le=1)
    mutation_rate: float = Field(0.05, ge=0, le=1)
    elitism: int = Field(4, ge=0)

    # Mixture density network
    n_components: int = Field(4, ge=1)
    mdn_include_constant: bool = True
    var_floor: float = Field(1e-6, gt=0)

    # Conditional VAE
    latent_dim: int = Field(4, ge=1)
    kl_weight: float = Field(1.0, ge=0)

    # Flows (INN, cINN)
    n_blocks: int = Field(4, ge=1)
    flow_hidden: Optional[List[int]] = None
    flow_sigma: float = Field(0.1, gt=0)
    flow_latent: Optional[int] = Field(None, ge=1)
    flow_pad: Optional[int] = Field(None, ge=0)
    clamp: Optional[float] = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "SolverConfig":
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"unknown solver {self.kind!r}; expected one of {SOLVER_KINDS}")
        if any(w <= 0 for w in self.hidden):
            raise ValueError(f"hidden widths must be positive, got {self.hidden}")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"activation must be relu or tanh, got {self.activation!r}")
        if self.population < self.elitism + 2:
            raise ValueError(
                f"population {self.population} must be >= elitism + 2 = {self.elitism + 2}"
            )
        return self

    def mlp(self, n_in: int, n_out: int, hidden: Optional[List[int]] = None, seed_offset: int = 0) -> MlpSpec:
        return MlpSpec.build(
            n_in,
            hidden if hidden is not None else self.hidden,
            n_out,
            activation=self.activation,  # type: ignore[arg-type]
            batchnorm=self.batchnorm,
            seed=self.seed + seed_offset,
        )


def solver_config(**kwargs) -> SolverConfig:
    """Build a `SolverConfig`, reporting validation failures as `ConfigError`."""
    try:
        return SolverConfig(**kwargs)
    except ValidationError as e:
        raise ConfigError(str(e)) from None


@dataclass
class ProposalSet:
    target: np.ndarray  # (d_s,)
    designs: np.ndarray  # (T, d_g), preferred order
    predicted_errors: Optional[np.ndarray] = None  # (T,)

    def __len__(self) -> int:
        return int(self.designs.shape[0])


class DesignScaler:
    """Task bounds <-> unit box [-1, 1]^d."""

    def __init__(self, task: TaskSpec):
        self.mu = task.mu_g
        self.half = task.r_g / 2.0

    def to_unit(self, g: np.ndarray) -> np.ndarray:
        return (np.asarray(g, dtype=np.float64) - self.mu) / self.half

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.mu + self.half * np.asarray(u, dtype=np.float64)


@dataclass
class SpectrumScaler:
    shift: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, spectra: np.ndarray) -> "SpectrumScaler":
        s = np.asarray(spectra, dtype=np.float64)
        scale = float(np.std(s))
        return cls(shift=float(np.mean(s)), scale=scale if scale > 0 else 1.0)

    def transform(self, s: np.ndarray) -> np.ndarray:
        return (np.asarray(s, dtype=np.float64) - self.shift) / self.scale

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return self.shift + self.scale * np.asarray(z, dtype=np.float64)

    def array(self) -> np.ndarray:
        return np.array([self.shift, self.scale])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SpectrumScaler":
        return cls(shift=float(arr[0]), scale=float(arr[1]))


class SolverManifest(BaseModel):
    kind: str
    task: TaskSpec
    config: SolverConfig
    seed: int
    n_parameters: int
    val_r1: Optional[float] = None
    train_seconds: float = 0.0


SOLVERS: Dict[str, Type["InverseSolver"]] = {}


def register_solver(kind: str) -> Callable[[Type["InverseSolver"]], Type["InverseSolver"]]:
    def deco(cls: Type["InverseSolver"]) -> Type["InverseSolver"]:
        cls.kind = kind
        SOLVERS[kind] = cls
        return cls

    return deco


def make_solver(kind: str, task: TaskSpec, cfg: Optional[SolverConfig] = None) -> "InverseSolver":
    # Registration happens on import of the solver modules.
    import aembench.flows  # noqa: F401
    import aembench.solvers  # noqa: F401

    if kind not in SOLVERS:
        raise ConfigError(f"unknown solver {kind!r}; expected one of {sorted(SOLVERS)}")
    cfg = (cfg or SolverConfig()).model_copy(update={"kind": kind})
    return SOLVERS[kind](task, cfg)


class InverseSolver(abc.ABC):
    kind: ClassVar[str] = ""
    # Deterministic solvers return one design repeated T times.
    deterministic: ClassVar[bool] = False

    def __init__(self, task: TaskSpec, cfg: SolverConfig):
        self.task = task
        self.cfg = cfg
        self.designs = DesignScaler(task)
        self.spectra = SpectrumScaler()
        self.trained = False

    # ------------------------------------------------------------------
    # Subclass hooks
    # ------------------------------------------------------------------
    @abc.abstractmethod
    def networks(self) -> Dict[str, Mlp]:
        """Named networks making up the solver state."""

    @abc.abstractmethod
    def _fit(self, g_tr: np.ndarray, s_tr: np.ndarray, g_val: np.ndarray, s_val: np.ndarray):
        """Train on unit designs and standardized spectra; returns a TrainHistory."""

    @abc.abstractmethod
    def _propose(
        self, s: np.ndarray, n: int, rng: np.random.Generator
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """`n` unit-coordinate designs for one standardized target, plus optional errors."""

    def extra_arrays(self) -> Dict[str, np.ndarray]:
        return {}

    def load_extra_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        pass

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------
    def train(self, dataset: Dataset):
        g_tr, s_tr = dataset.train
        g_val, s_val = dataset.val
        if g_tr.shape[1] != self.task.d_g or s_tr.shape[1] != self.task.d_s:
            raise ShapeError(
                f"{self.kind}.train",
                [g_tr.shape, s_tr.shape],
                f"task {self.task.name!r} is {self.task.d_g} -> {self.task.d_s}",
            )
        if len(g_tr) == 0:
            raise TrainingError("training split is empty")
        if len(g_val) == 0:
            logger.warning("%s: validation split is empty, selecting on training data", self.kind)
            g_val, s_val = g_tr, s_tr
        self.spectra = SpectrumScaler.fit(s_tr)
        history = self._fit(
            self.designs.to_unit(g_tr),
            self.spectra.transform(s_tr),
            self.designs.to_unit(g_val),
            self.spectra.transform(s_val),
        )
        self.trained = True
        return history

    def propose(self, s: np.ndarray, T: int, seed: int = 0) -> ProposalSet:
        if not self.trained:
            raise TrainingError(f"{self.kind}: propose called before training")
        if T < 1:
            raise ConfigError(f"T must be >= 1, got {T}")
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.task.d_s,):
            raise ShapeError(f"{self.kind}.propose", [s.shape], f"target must have {self.task.d_s} points")
        rng = np.random.default_rng(seed)
        unit, errors = self._propose(self.spectra.transform(s), T, rng)
        designs = self.task.clip(self.designs.from_unit(unit))
        return ProposalSet(target=s, designs=designs, predicted_errors=errors)

    def propose_many(self, targets: np.ndarray, T: int, seed: int = 0) -> List[ProposalSet]:
        return [self.propose(s, T, seed=seed + i) for i, s in enumerate(np.atleast_2d(targets))]

    def n_parameters(self) -> int:
        return sum(net.n_parameters() for net in self.networks().values())

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------
    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = {"spectrum_scaler": self.spectra.array()}
        for name, net in self.networks().items():
            arrays.update(net.named_arrays(f"{name}."))
        arrays.update(self.extra_arrays())
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        try:
            self.spectra = SpectrumScaler.from_array(arrays["spectrum_scaler"])
            for name, net in self.networks().items():
                net.load_arrays(arrays, f"{name}.")
            self.load_extra_arrays(arrays)
        except KeyError as e:
            raise CheckpointError(f"{self.kind} checkpoint is missing tensor {e}") from None
        except ShapeError as e:
            raise CheckpointError(f"{self.kind} checkpoint does not match its config: {e}") from None
        self.trained = True

    def save(
        self, path: Union[str, Path], val_r1: Optional[float] = None, train_seconds: float = 0.0
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        checkpoint.save(path, self.state_arrays())
        manifest = SolverManifest(
            kind=self.kind,
            task=self.task,
            config=self.cfg,
            seed=self.cfg.seed,
            n_parameters=self.n_parameters(),
            val_r1=val_r1,
            train_seconds=train_seconds,
        )
        manifest_path(path).write_text(manifest.model_dump_json(indent=2))
        return path


def read_manifest(path: Union[str, Path]) -> SolverManifest:
    mpath = manifest_path(path)
    if not mpath.exists():
        raise MissingArtifactError(f"solver manifest not found: {mpath}")
    return SolverManifest.model_validate_json(mpath.read_text())


def load_solver(path: Union[str, Path]) -> InverseSolver:
    manifest = read_manifest(path)
    solver = make_solver(manifest.kind, manifest.task, manifest.config)
    solver.load_state_arrays(checkpoint.load(path))
    return solver
