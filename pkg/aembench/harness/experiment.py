"""Experiment files.

An experiment is a line-oriented INI file::

    [task]
    name = toy

    [data]
    n = 2000
    fractions = 0.8, 0.1, 0.1

    [solver]
    kind = na
    hidden = 64, 64
    lr = 0.001

    [sweep]
    lr = 0.001, 0.0001
    hidden = 32 32, 64 64

    [eval]
    t_max = 50

Booleans are ``true``/``false`` and lists are comma-separated. In the
``[sweep]`` section every key lists grid values separated by commas; a
list-valued hyperparameter writes each value with spaces (``64 64``).

Values left unset are filled from the active `Scale` (desk unless
``--paper-scale``).
"""

from __future__ import annotations

import configparser
import logging
import typing
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from aembench.config import settings
from aembench.errors import ConfigError, MissingArtifactError
from aembench.limits import Scale, scale_for
from aembench.physics.tasks import TaskSpec, get_task
from aembench.solvers.base import SolverConfig

logger = logging.getLogger(__name__)

SECTIONS = ("task", "data", "solver", "sweep", "eval", "run")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class TaskConfig(BaseModel):
    name: str = "toy"
    # Surrogate checkpoint standing in for the simulator.
    checkpoint: Optional[str] = None

    def spec(self) -> TaskSpec:
        return get_task(self.name, self.checkpoint)


class DataConfig(BaseModel):
    path: Optional[str] = None
    n: Optional[int] = Field(None, ge=1)
    fractions: List[float] = Field(default_factory=lambda: [0.8, 0.2, 0.0])
    n_train: Optional[int] = Field(None, ge=0)
    n_val: Optional[int] = Field(None, ge=0)
    n_test: Optional[int] = Field(None, ge=0)
    jobs: int = Field(1, ge=1)

    def counts(self) -> Optional[Tuple[int, int, int]]:
        given = (self.n_train, self.n_val, self.n_test)
        if all(c is None for c in given):
            return None
        if any(c is None for c in given):
            raise ConfigError("data.n_train, data.n_val and data.n_test must be set together")
        return given  # type: ignore[return-value]


class SweepConfig(BaseModel):
    # Hyperparameter name -> grid values, in file order.
    grid: Dict[str, List[Any]] = Field(default_factory=dict)
    max_cells: Optional[int] = Field(None, ge=1)
    max_seconds: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "SweepConfig":
        unknown = set(self.grid) - set(SolverConfig.model_fields)
        if unknown:
            raise ValueError(f"unknown sweep hyperparameters {sorted(unknown)}")
        for key, values in self.grid.items():
            if not values:
                raise ValueError(f"sweep.{key} lists no values")
        return self


class EvalConfig(BaseModel):
    t_max: int = Field(200, ge=1)
    max_targets: Optional[int] = Field(None, ge=1)
    # Validation targets scored for r1 after training.
    max_val_targets: int = Field(200, ge=1)
    checkpoint: Optional[str] = None
    clusters: int = Field(5, ge=1)
    cluster_size: int = Field(5, ge=2)
    jobs: int = Field(1, ge=1)


class RunConfig(BaseModel):
    seed: int = 0
    out_dir: str = settings.DATA_DIR
    paper_scale: bool = False
    force: bool = False
    jobs: int = Field(1, ge=1)


class ExperimentConfig(BaseModel):
    task: TaskConfig = Field(default_factory=TaskConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    # ------------------------------------------------------------------
    # Output layout
    # ------------------------------------------------------------------
    @property
    def out(self) -> Path:
        return Path(self.run.out_dir)

    @property
    def scale(self) -> Scale:
        return scale_for(self.run.paper_scale)

    def dataset_path(self) -> Path:
        if self.data.path:
            return Path(self.data.path)
        return self.out / "data" / f"{self.task.name}-s{self.run.seed}.csv"

    def checkpoint_path(self, kind: Optional[str] = None) -> Path:
        """The selected checkpoint of a solver: written by train/sweep, read by eval."""
        if self.eval.checkpoint and kind is None:
            return Path(self.eval.checkpoint)
        return self.out / "checkpoints" / self.task.name / f"{kind or self.solver.kind}.ibchk"

    def report_dir(self) -> Path:
        return self.out / "reports" / self.task.name

    def runs_path(self) -> Path:
        return self.out / "runs.jsonl"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _is_list_field(model: type, key: str) -> bool:
    field = model.model_fields.get(key)
    if field is None:
        return False
    ann = field.annotation
    if typing.get_origin(ann) is Union:
        ann = next(a for a in typing.get_args(ann) if a is not type(None))
    return typing.get_origin(ann) in (list, List)


def _scalar(raw: str) -> Any:
    text = raw.strip()
    low = text.lower()
    if low in ("none", ""):
        return None
    if low in _TRUE - {"1"}:
        return True
    if low in _FALSE - {"0"}:
        return False
    return text


def _split(raw: str, sep: Optional[str] = ",") -> List[str]:
    return [p.strip() for p in raw.split(sep) if p.strip()]


def _section_values(name: str, items: Dict[str, str]) -> Dict[str, Any]:
    model = {
        "task": TaskConfig,
        "data": DataConfig,
        "solver": SolverConfig,
        "eval": EvalConfig,
        "run": RunConfig,
    }[name]
    out: Dict[str, Any] = {}
    for key, raw in items.items():
        if key not in model.model_fields:
            raise ConfigError(f"unknown key {name}.{key}")
        out[key] = _split(raw) if _is_list_field(model, key) else _scalar(raw)
    return out


def _sweep_values(items: Dict[str, str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {"grid": {}}
    for key, raw in items.items():
        if key in ("max_cells", "max_seconds"):
            out[key] = _scalar(raw)
        elif _is_list_field(SolverConfig, key):
            out["grid"][key] = [_split(v, None) for v in _split(raw)]
        else:
            out["grid"][key] = [_scalar(v) for v in _split(raw)]
    return out


def parse_overrides(overrides: Sequence[str]) -> Dict[str, Dict[str, str]]:
    """``section.key=value`` strings -> {section: {key: value}}."""
    parsed: Dict[str, Dict[str, str]] = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r} in override {item!r}")
        parsed.setdefault(section, {})[key.strip()] = value.strip()
    return parsed


def read_ini(path: Optional[Union[str, Path]]) -> Dict[str, Dict[str, str]]:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"experiment file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    # Keep key case as written.
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)} in {path}")
    return {s: dict(parser.items(s)) for s in parser.sections()}


def apply_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill unset budgets from the active scale; seeds default to ``run.seed``."""
    scale = cfg.scale
    solver_update: Dict[str, Any] = {}
    if "epochs" not in cfg.solver.model_fields_set:
        solver_update["epochs"] = scale.epochs
    if "batch_size" not in cfg.solver.model_fields_set:
        solver_update["batch_size"] = scale.batch_size
    if "seed" not in cfg.solver.model_fields_set:
        solver_update["seed"] = cfg.run.seed
    eval_update: Dict[str, Any] = {}
    if "t_max" not in cfg.eval.model_fields_set:
        eval_update["t_max"] = scale.t_max
    data_update: Dict[str, Any] = {}
    if cfg.data.n is None and cfg.data.counts() is None:
        n_train, n_val, n_test = scale.split_sizes(cfg.task.name)
        data_update.update(n_train=n_train, n_val=n_val, n_test=n_test)
    return cfg.model_copy(
        update={
            "solver": cfg.solver.model_copy(update=solver_update),
            "eval": cfg.eval.model_copy(update=eval_update),
            "data": cfg.data.model_copy(update=data_update),
        }
    )


def load_experiment(
    path: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = (),
    **run: Any,
) -> ExperimentConfig:
    """Read an experiment file, apply ``--set`` overrides and CLI run options.

    `run` holds run-section values given as flags (``seed``, ``paper_scale``,
    ``force``, ``jobs``, ``out_dir``); ``None`` values are ignored.
    """
    sections = read_ini(path)
    for section, items in parse_overrides(overrides).items():
        sections.setdefault(section, {}).update(items)

    values: Dict[str, Any] = {}
    for name, items in sections.items():
        values[name] = _sweep_values(items) if name == "sweep" else _section_values(name, items)
    run_values = values.setdefault("run", {})
    run_values.update({k: v for k, v in run.items() if v is not None})

    try:
        cfg = ExperimentConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(str(e)) from None
    cfg = apply_scale(cfg)
    logger.debug("experiment: %s", cfg.model_dump_json())
    return cfg
