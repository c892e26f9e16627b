"""Harness commands behind the CLI verbs.

All commands:
- take a validated `ExperimentConfig`
- write their artifacts under ``run.out_dir``
- return JSON-only dictionaries (``{"ok": True, ...}`` or
  ``{"ok": False, "error": ..., "exit_code": ...}``)
- never raise uncaught exceptions

Output layout::

    data/<task>-s<seed>.csv(.json)          datasets
    checkpoints/<task>/<kind>-<hash>.ibchk   one per trained config
    checkpoints/<task>/<kind>.ibchk          the selected model (train/sweep)
    sweeps/<task>/<kind>/cell-<i>-<hash>/    isolated sweep cells
    surrogates/<task>-surrogate.ibchk        fit-surrogate
    reports/<task>/<kind>.json               eval reports
    reports/<task>/<kind>-proposals.csv      proposal dumps
    reports/<task>/clusters.csv              D_r clusters
    tables/                                  report tables and plots
    runs.jsonl                               run records
"""

from __future__ import annotations

import functools
import itertools
import logging
import shutil
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from aembench.autodiff.nn import Mlp
from aembench.errors import (
    BenchError,
    CheckpointError,
    ConfigError,
    MetricError,
    MissingArtifactError,
    NumericError,
    TrainingError,
)
from aembench.harness.experiment import ExperimentConfig
from aembench.harness.runs import RunLog, RunRecord, content_hash, file_hash
from aembench.metrics.plotting import plot_rt_curves
from aembench.metrics.report import (
    EvalReport,
    curves_table,
    load_report,
    merge_reports,
    results_table,
    save_report,
    timing_report,
    timing_table,
    uniqueness_table,
)
from aembench.metrics.resim import RTCurve, resim_error_matrix, rt_curve
from aembench.metrics.uniqueness import d_r, gamma, spectra_clusters
from aembench.physics.dataset import (
    Dataset,
    generate_dataset,
    load_dataset,
    load_manifest,
    manifest_path,
    save_dataset,
)
from aembench.physics.surrogate import SurrogateModel, save_surrogate
from aembench.physics.tasks import TaskSpec
from aembench.solvers.base import (
    DesignScaler,
    SolverConfig,
    SpectrumScaler,
    load_solver,
    make_solver,
    read_manifest,
    solver_config,
)
from aembench.solvers.forward import forward_spec, train_forward
from aembench.validate import missing_inputs, validate_experiment

logger = logging.getLogger(__name__)

# Solvers whose T=1 errors define gamma.
GAMMA_PAIR = ("nn", "na")


# Utilities
def _ok(payload: Dict[str, Any]) -> Dict[str, Any]:
    return {"ok": True, **payload}


def _err(msg: str, exit_code: int = 1, **extra: Any) -> Dict[str, Any]:
    return {"ok": False, "error": msg, "exit_code": exit_code, **extra}


def command(fn: Callable[..., Dict[str, Any]]) -> Callable[..., Dict[str, Any]]:
    """Map benchmark errors to `_err` payloads carrying their exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs) -> Dict[str, Any]:
        try:
            return fn(*args, **kwargs)
        except BenchError as e:
            logger.error("%s failed: %s", fn.__name__, e)
            return _err(str(e), e.exit_code)
        except Exception as e:
            logger.exception("%s failed", fn.__name__)
            return _err(f"{type(e).__name__}: {e}", 1)

    return wrapper


def _check(cfg: ExperimentConfig, name: str) -> Dict[str, Any]:
    missing = missing_inputs(cfg, name)
    if missing:
        raise MissingArtifactError("missing " + ", ".join(missing))
    ok, info = validate_experiment(cfg, name)
    if not ok:
        raise ConfigError(str(info))
    return info  # type: ignore[return-value]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def config_hash(task: TaskSpec, solver_cfg: SolverConfig) -> str:
    return content_hash({"task": task.name, "grid": task.grid_hash(), "solver": solver_cfg.model_dump()})


def input_hash(cfg: ExperimentConfig, task: TaskSpec) -> str:
    return content_hash(
        {
            "dataset": file_hash(cfg.dataset_path()),
            "task": task.model_dump(),
            "max_val_targets": cfg.eval.max_val_targets,
        }
    )


def _copy_checkpoint(src: Path, dst: Path) -> Path:
    dst.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(src, dst)
    shutil.copyfile(manifest_path(src), manifest_path(dst))
    return dst


# ---------------------------------------------------------------------------
# Training (shared by train and sweep cells)
# ---------------------------------------------------------------------------


def validation_r1(solver, task: TaskSpec, ds: Dataset, max_targets: int, seed: int, jobs: int = 1) -> float:
    """Mean re-simulation error of the first proposal over validation targets."""
    _, s_val = ds.val
    if len(s_val) == 0:
        _, s_val = ds.train
    return rt_curve(solver, task, s_val[:max_targets], 1, seed=seed, jobs=jobs).r1


def train_one(
    cfg: ExperimentConfig,
    solver_cfg: SolverConfig,
    task: TaskSpec,
    ds: Dataset,
    inputs: str,
    ckpt: Path,
    command_name: str,
    cell: Optional[int] = None,
) -> RunRecord:
    """Train, score on validation and checkpoint one solver config.

    Numeric failures come back as a failed record; the caller appends it.
    """
    record = RunRecord(
        command=command_name,
        task=task.name,
        solver=solver_cfg.kind,
        seed=solver_cfg.seed,
        config_hash=config_hash(task, solver_cfg),
        input_hash=inputs,
        cell=cell,
    )
    try:
        solver = make_solver(solver_cfg.kind, task, solver_cfg)
        t0 = time.perf_counter()
        history = solver.train(ds)
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        r1 = validation_r1(solver, task, ds, cfg.eval.max_val_targets, cfg.run.seed, cfg.eval.jobs)
        eval_s = time.perf_counter() - t0
        if not np.isfinite(r1):
            raise TrainingError(f"validation r1 is not finite ({r1})")
    except NumericError as e:
        logger.error("%s on %s failed: %s", solver_cfg.kind, task.name, e)
        return record.model_copy(update={"status": "failed", "diagnostic": f"{type(e).__name__}: {e}"})

    solver.save(ckpt, val_r1=r1, train_seconds=train_s)
    logger.info("%s on %s: val r1 %.4e (%.1fs)", solver_cfg.kind, task.name, r1, train_s)
    return record.model_copy(
        update={
            "train_loss": history.train_loss,
            "val_loss": history.val_loss,
            "val_r1": r1,
            "train_seconds": train_s,
            "eval_seconds": eval_s,
            "checkpoint": str(ckpt),
        }
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@command
def cmd_gen_data(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Sample designs uniformly over the task bounds and simulate their spectra."""
    _check(cfg, "gen-data")
    task = cfg.task.spec()
    path = cfg.dataset_path()
    if path.exists() and not cfg.run.force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")

    ds = generate_dataset(
        task,
        n=cfg.data.n,
        seed=cfg.run.seed,
        fractions=cfg.data.fractions,
        counts=cfg.data.counts(),
        jobs=max(cfg.data.jobs, cfg.run.jobs),
    )
    save_dataset(path, ds, task)
    return _ok(
        {
            "file": str(path),
            "task": task.name,
            "seed": cfg.run.seed,
            "counts": ds.counts(),
            "sha256": load_manifest(path).csv_sha256,
        }
    )


@command
def cmd_fit_surrogate(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Train a forward MLP on a dataset and store it as a surrogate task."""
    _check(cfg, "fit-surrogate")
    task = cfg.task.spec()
    name = task.name if task.name.endswith("-surrogate") else f"{task.name}-surrogate"
    path = cfg.out / "surrogates" / f"{name}.ibchk"
    if path.exists() and not cfg.run.force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")

    ds = load_dataset(cfg.dataset_path(), task)
    g_tr, s_tr = ds.train
    g_val, s_val = ds.val
    if len(g_val) == 0:
        logger.warning("validation split is empty, selecting the surrogate on training data")
        g_val, s_val = g_tr, s_tr
    designs = DesignScaler(task)
    spectra = SpectrumScaler.fit(s_tr)
    net = Mlp(forward_spec(task, cfg.solver))
    history = train_forward(
        net,
        designs.to_unit(g_tr),
        spectra.transform(s_tr),
        designs.to_unit(g_val),
        spectra.transform(s_val),
        cfg.solver,
        label="surrogate",
    )
    model = SurrogateModel(
        net,
        task.model_copy(update={"name": name}),
        in_shift=designs.mu,
        in_scale=designs.half,
        out_shift=spectra.shift,
        out_scale=spectra.scale,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    save_surrogate(path, model, source=str(cfg.dataset_path()))
    val_mse = float(np.mean((model.predict(g_val) - s_val) ** 2))
    logger.info("surrogate %s: validation MSE %.4e", name, val_mse)
    return _ok(
        {
            "checkpoint": str(path),
            "task": name,
            "val_mse": val_mse,
            "epochs": len(history.train_loss),
        }
    )


@command
def cmd_train(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Train one solver; the checkpoint becomes the selected model for eval."""
    _check(cfg, "train")
    task = cfg.task.spec()
    ds = load_dataset(cfg.dataset_path(), task)
    inputs = input_hash(cfg, task)
    chash = config_hash(task, cfg.solver)
    log = RunLog(cfg.runs_path())

    cached = None if cfg.run.force else log.completed(chash, inputs)
    if cached is not None:
        record = cached
    else:
        ckpt = cfg.out / "checkpoints" / task.name / f"{cfg.solver.kind}-{chash}.ibchk"
        record = log.append(train_one(cfg, cfg.solver, task, ds, inputs, ckpt, "train"))
    if not record.ok:
        return _err(record.diagnostic, 3, record=record.model_dump())

    selected = _copy_checkpoint(Path(record.checkpoint), cfg.checkpoint_path(cfg.solver.kind))
    return _ok(
        {
            "checkpoint": record.checkpoint,
            "selected": str(selected),
            "val_r1": record.val_r1,
            "cached": cached is not None,
            "epochs": cfg.solver.epochs,
            "batch_size": cfg.solver.batch_size,
            "record": record.model_dump(),
        }
    )


def sweep_cells(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """Grid cells in file order (last key varies fastest), capped at ``sweep.max_cells``."""
    keys = list(cfg.sweep.grid)
    cells = [dict(zip(keys, values)) for values in itertools.product(*(cfg.sweep.grid[k] for k in keys))]
    if cfg.sweep.max_cells is not None and len(cells) > cfg.sweep.max_cells:
        logger.warning("sweep has %d cells, running the first %d", len(cells), cfg.sweep.max_cells)
        cells = cells[: cfg.sweep.max_cells]
    return cells


def _cell_dir(cfg: ExperimentConfig, task: TaskSpec, cell: int, chash: str) -> Path:
    return cfg.out / "sweeps" / task.name / cfg.solver.kind / f"cell-{cell}-{chash}"


def _run_cell(cfg_json: str, cell: int, solver_json: str, inputs: str, ckpt: str) -> str:
    """Process-pool entry point; arguments and result are JSON strings."""
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    solver_cfg = SolverConfig.model_validate_json(solver_json)
    task = cfg.task.spec()
    ds = load_dataset(cfg.dataset_path(), task)
    record = train_one(cfg, solver_cfg, task, ds, inputs, Path(ckpt), "sweep", cell=cell)
    return record.model_dump_json()


@command
def cmd_sweep(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Train every grid cell and select the lowest validation r1 (ties: earliest cell)."""
    _check(cfg, "sweep")
    task = cfg.task.spec()
    load_dataset(cfg.dataset_path(), task)
    inputs = input_hash(cfg, task)
    log = RunLog(cfg.runs_path())
    base = cfg.solver.model_dump()

    records: Dict[int, RunRecord] = {}
    pending: List[Tuple[int, SolverConfig, Path]] = []
    for i, values in enumerate(sweep_cells(cfg)):
        chash = content_hash({"cell": values})
        try:
            solver_cfg = solver_config(**{**base, **values})
        except ConfigError as e:
            records[i] = log.append(
                RunRecord(
                    command="sweep",
                    task=task.name,
                    solver=cfg.solver.kind,
                    seed=cfg.solver.seed,
                    config_hash=chash,
                    input_hash=inputs,
                    status="failed",
                    cell=i,
                    diagnostic=f"ConfigError: {e}",
                )
            )
            continue
        chash = config_hash(task, solver_cfg)
        cached = None if cfg.run.force else log.completed(chash, inputs)
        if cached is not None:
            records[i] = cached.model_copy(update={"cell": i})
            continue
        pending.append((i, solver_cfg, _cell_dir(cfg, task, i, chash) / "model.ibchk"))

    start = time.perf_counter()
    cap = cfg.sweep.max_seconds

    def over_budget() -> bool:
        return cap is not None and time.perf_counter() - start > cap

    if cfg.run.jobs > 1 and len(pending) > 1:
        cfg_json = cfg.model_dump_json()
        with ProcessPoolExecutor(max_workers=cfg.run.jobs) as pool:
            futures = {
                pool.submit(_run_cell, cfg_json, i, sc.model_dump_json(), inputs, str(ck)): i
                for i, sc, ck in pending
            }
            for fut in as_completed(futures):
                if fut.cancelled():
                    continue
                rec = RunRecord.model_validate_json(fut.result())
                records[futures[fut]] = log.append(rec)
                if over_budget():
                    n = sum(f.cancel() for f in futures)
                    if n:
                        logger.warning("sweep wall-clock cap reached, %d cells cancelled", n)
    else:
        ds = load_dataset(cfg.dataset_path(), task)
        for i, solver_cfg, ckpt in pending:
            if over_budget():
                logger.warning("sweep wall-clock cap reached, skipping cells from %d on", i)
                break
            records[i] = log.append(train_one(cfg, solver_cfg, task, ds, inputs, ckpt, "sweep", cell=i))

    ordered = [records[i] for i in sorted(records)]
    done = [r for r in ordered if r.ok and r.val_r1 is not None]
    if not done:
        raise TrainingError(f"all {len(ordered)} sweep cells failed")
    best = min(done, key=lambda r: (r.val_r1, r.cell))
    selected = _copy_checkpoint(Path(best.checkpoint), cfg.checkpoint_path(cfg.solver.kind))
    best_cfg = read_manifest(selected).config
    logger.info("sweep %s on %s: best cell %d, val r1 %.4e", cfg.solver.kind, task.name, best.cell, best.val_r1)
    return _ok(
        {
            "best_cell": best.cell,
            "best_val_r1": best.val_r1,
            "best_config": best_cfg.model_dump(),
            "selected": str(selected),
            "cells": len(ordered),
            "failed": sum(1 for r in ordered if not r.ok),
            "records": [r.model_dump() for r in ordered],
        }
    )


def write_proposals(path: Path, designs: Sequence[np.ndarray]) -> Path:
    d_g = designs[0].shape[1]
    lines = [",".join(["target", "rank"] + [f"g{j}" for j in range(d_g)])]
    for t, block in enumerate(designs):
        for rank, g in enumerate(block):
            lines.append(",".join([str(t), str(rank)] + [_fmt(v) for v in g]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_clusters(path: Path, designs: np.ndarray, clusters: Sequence[np.ndarray]) -> Path:
    """Cluster label, dataset row and design of every clustered point."""
    lines = [",".join(["cluster", "row"] + [f"g{j}" for j in range(designs.shape[1])])]
    for c, rows in enumerate(clusters):
        for row in rows:
            lines.append(",".join([str(c), str(int(row))] + [_fmt(v) for v in designs[row]]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _attach_gamma(cfg: ExperimentConfig, report: EvalReport) -> EvalReport:
    """Set gamma on this report and on the NN/NA reports once both exist."""
    found: Dict[str, EvalReport] = {report.solver: report}
    for kind in GAMMA_PAIR:
        path = cfg.report_dir() / f"{kind}.json"
        if kind not in found and path.exists():
            found[kind] = load_report(path)
    missing = [k for k in GAMMA_PAIR if k not in found]
    if missing:
        logger.warning("gamma for %s needs %s reports; missing %s", report.task, "/".join(GAMMA_PAIR), missing)
        return report
    try:
        value = gamma(found["nn"].r1, found["na"].r1)
    except MetricError as e:
        logger.warning("gamma for %s not computed: %s", report.task, e)
        return report
    for kind in GAMMA_PAIR:
        if kind != report.solver:
            save_report(cfg.report_dir() / f"{kind}.json", found[kind].model_copy(update={"gamma": value}))
    return report.model_copy(update={"gamma": value})


def _dataset_d_r(cfg: ExperimentConfig, task: TaskSpec, ds: Dataset) -> Optional[float]:
    g_tr, s_tr = ds.train
    try:
        clusters = spectra_clusters(s_tr, cfg.eval.clusters, cfg.eval.cluster_size, seed=cfg.run.seed)
        value = d_r(g_tr, [g_tr[c] for c in clusters], task)
    except MetricError as e:
        logger.warning("D_r for %s not computed: %s", task.name, e)
        return None
    write_clusters(cfg.report_dir() / "clusters.csv", g_tr, clusters)
    return value


@command
def cmd_eval(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Score the selected checkpoint on the test split through the true forward model."""
    _check(cfg, "eval")
    task = cfg.task.spec()
    ds = load_dataset(cfg.dataset_path(), task)
    ckpt = cfg.checkpoint_path()
    solver = load_solver(ckpt)
    manifest = read_manifest(ckpt)
    if solver.task.grid_hash() != task.grid_hash() or solver.task.d_g != task.d_g:
        raise CheckpointError(f"checkpoint {ckpt} was trained for task {solver.task.name!r}, not {task.name!r}")

    _, targets = ds.test
    if len(targets) == 0:
        raise MissingArtifactError(f"dataset {cfg.dataset_path()} has no test split")
    targets = targets[: cfg.eval.max_targets]
    t_max = cfg.eval.t_max

    t0 = time.perf_counter()
    proposals = solver.propose_many(targets, t_max, seed=cfg.run.seed)
    inference_s = time.perf_counter() - t0
    designs = [p.designs for p in proposals]
    errors = resim_error_matrix(task, targets, designs, jobs=max(cfg.eval.jobs, cfg.run.jobs))
    curve = RTCurve.from_errors(solver.kind, task.name, errors)
    timing = timing_report(manifest.train_seconds, inference_s, len(targets) * t_max)

    report = EvalReport(
        solver=solver.kind,
        task=task.name,
        seed=cfg.run.seed,
        t_max=t_max,
        n_targets=len(targets),
        curve=curve,
        d_r=_dataset_d_r(cfg, task, ds),
        n_parameters=solver.n_parameters(),
        config_hash=config_hash(task, solver.cfg),
        dataset_hash=load_manifest(cfg.dataset_path()).csv_sha256[:12],
        grid_hash=task.grid_hash(),
        **timing,
    )
    report = _attach_gamma(cfg, report)
    proposals_file = write_proposals(cfg.report_dir() / f"{solver.kind}-proposals.csv", designs)
    report_file = save_report(cfg.report_dir() / f"{solver.kind}.json", report)
    return _ok(
        {
            "report": str(report_file),
            "proposals": str(proposals_file),
            "r1": report.r1,
            "r_tmax": report.r_tmax,
            "gamma": report.gamma,
            "d_r": report.d_r,
            **timing,
        }
    )


@command
def cmd_report(cfg: ExperimentConfig, run_dir: Optional[str] = None) -> Dict[str, Any]:
    """Merge every eval report under a run directory into tables and r_T plots."""
    root = Path(run_dir) if run_dir else cfg.out
    files = sorted(root.glob("reports/*/*.json"))
    if not files:
        raise MissingArtifactError(f"no eval reports under {root / 'reports'}")
    reports = merge_reports(load_report(f) for f in files)

    out = root / "tables"
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, render in (
        ("results", results_table),
        ("uniqueness", uniqueness_table),
        ("timing", timing_table),
        ("curves", curves_table),
    ):
        path = out / f"{name}.csv"
        path.write_text(render(reports))
        written[name] = str(path)

    plots = []
    for task in sorted({r.task for r in reports}):
        path = out / f"rt_{task}.png"
        plot_rt_curves([r.curve for r in reports if r.task == task], path, title=task)
        plots.append(str(path))
    return _ok({"reports": len(reports), "tables": written, "plots": plots})
