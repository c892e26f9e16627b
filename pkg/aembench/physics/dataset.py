"""Dataset generation and the CSV + manifest on-disk format."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from aembench.errors import ConfigError, DomainError, MissingArtifactError
from aembench.physics.tasks import TaskSpec

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    task: str
    seed: int
    designs: np.ndarray  # (N, d_g)
    spectra: np.ndarray  # (N, d_s)
    split: np.ndarray  # (N,) of "train" / "val" / "test"

    def __post_init__(self):
        n = self.designs.shape[0]
        if self.spectra.shape[0] != n or self.split.shape[0] != n:
            raise ConfigError(
                f"dataset rows disagree: designs {self.designs.shape}, "
                f"spectra {self.spectra.shape}, split {self.split.shape}"
            )
        unknown = set(np.unique(self.split)) - set(SPLITS)
        if unknown:
            raise ConfigError(f"unknown split labels {sorted(unknown)}")

    def __len__(self) -> int:
        return int(self.designs.shape[0])

    def part(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        mask = self.split == name
        return self.designs[mask], self.spectra[mask]

    @property
    def train(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.part("train")

    @property
    def val(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.part("val")

    @property
    def test(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.part("test")

    def counts(self) -> Dict[str, int]:
        return {s: int(np.sum(self.split == s)) for s in SPLITS}


class DatasetManifest(BaseModel):
    task: str
    seed: int
    n: int
    counts: Dict[str, int]
    lower: List[float]
    upper: List[float]
    grid: List[float]
    grid_unit: str
    csv_sha256: str


def split_counts(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """(train, val, test) row counts; val and test are floored, train takes the rest."""
    if n <= 0:
        raise ConfigError(f"dataset size must be positive, got {n}")
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError(f"need three non-negative split fractions, got {list(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")
    n_val = int(np.floor(n * fractions[1]))
    n_test = int(np.floor(n * fractions[2]))
    return n - n_val - n_test, n_val, n_test


def sample_design(task: TaskSpec, seed: int, row: int) -> np.ndarray:
    """Row `row` of the design matrix; independent of how rows are sharded."""
    rng = np.random.default_rng([seed, row])
    return task.lo + task.r_g * rng.random(task.d_g)


def generate_dataset(
    task: TaskSpec,
    n: Optional[int] = None,
    seed: int = 0,
    fractions: Sequence[float] = (0.8, 0.2, 0.0),
    counts: Optional[Tuple[int, int, int]] = None,
    jobs: int = 1,
) -> Dataset:
    """Uniform designs over the bounds box and their spectra.

    Either `counts` (train, val, test) or `n` with `fractions` fixes the
    split sizes. Rows are assigned to splits contiguously in that order.
    """
    from aembench.physics import simulate

    if counts is None:
        if n is None:
            raise ConfigError("generate_dataset needs n or counts")
        counts = split_counts(n, fractions)
    if any(c < 0 for c in counts) or sum(counts) <= 0:
        raise ConfigError(f"invalid split counts {counts}")
    total = int(sum(counts))

    designs = np.stack([sample_design(task, seed, i) for i in range(total)])

    if jobs > 1:
        chunks = np.array_split(np.arange(total), jobs)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda idx: simulate(task, designs[idx]), chunks))
        spectra = np.concatenate(parts, axis=0)
    else:
        spectra = simulate(task, designs)

    split = np.array(sum(([name] * c for name, c in zip(SPLITS, counts)), []), dtype=object)
    logger.info("generated %s dataset: %d rows (seed=%d, counts=%s)", task.name, total, seed, counts)
    return Dataset(task=task.name, seed=seed, designs=designs, spectra=spectra, split=split)


# ---------------------------------------------------------------------------
# CSV format
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def to_csv(ds: Dataset) -> str:
    d_g, d_s = ds.designs.shape[1], ds.spectra.shape[1]
    header = [f"g{i}" for i in range(d_g)] + [f"s{i}" for i in range(d_s)] + ["split"]
    lines = [",".join(header)]
    for g, s, label in zip(ds.designs, ds.spectra, ds.split):
        lines.append(",".join([_fmt(v) for v in g] + [_fmt(v) for v in s] + [str(label)]))
    return "\n".join(lines) + "\n"


def manifest_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_dataset(path: Union[str, Path], ds: Dataset, task: TaskSpec) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = to_csv(ds)
    path.write_text(text)
    manifest = DatasetManifest(
        task=task.name,
        seed=ds.seed,
        n=len(ds),
        counts=ds.counts(),
        lower=list(task.lower),
        upper=list(task.upper),
        grid=list(task.grid),
        grid_unit=task.grid_unit,
        csv_sha256=hashlib.sha256(text.encode()).hexdigest(),
    )
    manifest_path(path).write_text(manifest.model_dump_json(indent=2))
    return path


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    mpath = manifest_path(path)
    if not mpath.exists():
        raise MissingArtifactError(f"dataset manifest not found: {mpath}")
    return DatasetManifest.model_validate_json(mpath.read_text())


def load_dataset(path: Union[str, Path], task: Optional[TaskSpec] = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"dataset not found: {path}")
    manifest = load_manifest(path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    d_g = sum(1 for h in header if h.startswith("g"))
    d_s = sum(1 for h in header if h.startswith("s") and h != "split")
    if task is not None and (task.d_g, task.d_s) != (d_g, d_s):
        raise DomainError(
            f"dataset {path} has shape ({d_g}, {d_s}), task {task.name!r} expects ({task.d_g}, {task.d_s})"
        )
    rows = [line.split(",") for line in lines[1:] if line]
    values = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=np.float64)
    labels = np.array([r[-1] for r in rows], dtype=object)
    return Dataset(
        task=manifest.task,
        seed=manifest.seed,
        designs=values[:, :d_g].reshape(-1, d_g),
        spectra=values[:, d_g:].reshape(-1, d_s),
        split=labels,
    )
