"""Evaluation reports and the consolidated tables built from them."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from aembench.errors import MetricError, MissingArtifactError, ReportError
from aembench.metrics.resim import RTCurve
from aembench.metrics.uniqueness import GAMMA_CONVENTION

logger = logging.getLogger(__name__)

PROPOSAL_BATCH = 200
SOLVER_ORDER = ("nn", "tandem", "na", "ga", "mdn", "vae", "inn", "cinn")
DETERMINISTIC = ("nn", "tandem")


def timing_report(train_seconds: float, inference_seconds: float, n_proposals: int) -> Dict[str, float]:
    """Training time and inference time scaled to a batch of 200 proposals."""
    if train_seconds < 0 or inference_seconds < 0:
        raise MetricError(f"durations must be non-negative, got {train_seconds}, {inference_seconds}")
    if n_proposals <= 0:
        raise MetricError(f"need at least one proposal to normalize inference time, got {n_proposals}")
    return {
        "train_seconds": float(train_seconds),
        "inference_seconds_per_200": float(inference_seconds) * PROPOSAL_BATCH / n_proposals,
    }


class EvalReport(BaseModel):
    solver: str
    task: str
    seed: int
    t_max: int
    n_targets: int
    curve: RTCurve
    gamma: Optional[float] = None
    gamma_convention: str = GAMMA_CONVENTION
    d_r: Optional[float] = None
    train_seconds: float = 0.0
    inference_seconds_per_200: float = 0.0
    n_parameters: int = 0
    config_hash: str = ""
    dataset_hash: str = ""
    grid_hash: str = ""

    @property
    def r1(self) -> float:
        return self.curve.r1

    @property
    def r_tmax(self) -> float:
        return self.curve.r[-1]


def save_report(path: Union[str, Path], report: EvalReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2))
    return path


def load_report(path: Union[str, Path]) -> EvalReport:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"report not found: {path}")
    return EvalReport.model_validate_json(path.read_text())


def _solver_key(kind: str) -> Tuple[int, str]:
    return (SOLVER_ORDER.index(kind) if kind in SOLVER_ORDER else len(SOLVER_ORDER), kind)


def merge_reports(reports: Iterable[EvalReport]) -> List[EvalReport]:
    """Canonically sorted reports; one per (task, solver), one grid per task."""
    grids: Dict[str, str] = {}
    seen: Dict[Tuple[str, str], EvalReport] = {}
    for rep in reports:
        if grids.setdefault(rep.task, rep.grid_hash) != rep.grid_hash:
            raise ReportError(f"reports for task {rep.task!r} use different spectral grids")
        key = (rep.task, rep.solver)
        if key in seen and seen[key].config_hash != rep.config_hash:
            raise ReportError(f"two different {rep.solver} reports for task {rep.task!r}")
        seen[key] = rep
    return sorted(seen.values(), key=lambda r: (r.task, _solver_key(r.solver)))


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else format(x, ".6e")


def _fmt_or_dash(x: Optional[float]) -> str:
    return "-" if x is None else _fmt(x)


def results_table(reports: Sequence[EvalReport]) -> str:
    """Rows are (task, T block), columns are solvers.

    Deterministic solvers show "-" in the T_max block.
    """
    reports = merge_reports(reports)
    solvers = sorted({r.solver for r in reports}, key=_solver_key)
    tasks = sorted({r.task for r in reports})
    by_key = {(r.task, r.solver): r for r in reports}
    lines = [",".join(["task", "T"] + solvers)]
    for task in tasks:
        t_max = max(r.t_max for r in reports if r.task == task)
        first = [_fmt(by_key[(task, s)].r1) if (task, s) in by_key else "" for s in solvers]
        last = []
        for s in solvers:
            rep = by_key.get((task, s))
            if rep is None:
                last.append("")
            elif s in DETERMINISTIC:
                last.append("-")
            else:
                last.append(_fmt(rep.r_tmax))
        lines.append(",".join([task, "1"] + first))
        lines.append(",".join([task, str(t_max)] + last))
    return "\n".join(lines) + "\n"


def uniqueness_table(reports: Sequence[EvalReport]) -> str:
    reports = merge_reports(reports)
    lines = ["task,solver,gamma,d_r,n_parameters,config_hash,dataset_hash"]
    for r in reports:
        cells = [r.task, r.solver, _fmt_or_dash(r.gamma), _fmt_or_dash(r.d_r), str(r.n_parameters)]
        lines.append(",".join(cells + [r.config_hash, r.dataset_hash]))
    return "\n".join(lines) + "\n"


def timing_table(reports: Sequence[EvalReport]) -> str:
    reports = merge_reports(reports)
    lines = ["task,solver,train_seconds,inference_seconds_per_200"]
    for r in reports:
        lines.append(f"{r.task},{r.solver},{r.train_seconds:.3f},{r.inference_seconds_per_200:.3f}")
    return "\n".join(lines) + "\n"


def curves_table(reports: Sequence[EvalReport]) -> str:
    reports = merge_reports(reports)
    lines = ["solver,task,T,r_T,p25,p75"]
    for rep in reports:
        c = rep.curve
        for t, r, lo, hi in zip(c.T, c.r, c.p25, c.p75):
            lines.append(f"{rep.solver},{rep.task},{t},{_fmt(r)},{_fmt(lo)},{_fmt(hi)}")
    return "\n".join(lines) + "\n"
