"""Experiment parsing, the harness commands and the CLI."""

import json

import numpy as np
import pytest

from aembench import cli
from aembench.errors import ConfigError, MissingArtifactError, TrainingError
from aembench.harness import (
    RunLog,
    cmd_eval,
    cmd_fit_surrogate,
    cmd_gen_data,
    cmd_report,
    cmd_sweep,
    cmd_train,
    content_hash,
    load_experiment,
)
from aembench.harness import commands
from aembench.harness.commands import sweep_cells
from aembench.metrics import RTCurve, load_report, save_report
from aembench.physics import simulate
from aembench.physics.dataset import load_dataset
from aembench.physics.tasks import get_task
from aembench.solvers import read_manifest

EXPERIMENT = """\
[task]
name = toy

[data]
n_train = 120
n_val = 30
n_test = 6

[solver]
kind = nn
hidden = 8, 8
epochs = 2
batch_size = 32
lr = 0.01
na_steps = 10
population = 12
generations = 2

[eval]
t_max = 3
max_val_targets = 10
clusters = 2
cluster_size = 3
"""


@pytest.fixture
def ini(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(EXPERIMENT)
    return path


@pytest.fixture
def experiment(ini, tmp_path):
    def make(*overrides, **run):
        run.setdefault("out_dir", str(tmp_path / "runs"))
        return load_experiment(ini, overrides, **run)

    return make


@pytest.fixture
def with_data(experiment):
    cfg = experiment()
    assert cmd_gen_data(cfg)["ok"]
    return experiment


class TestExperiment:
    def test_file_values(self, experiment):
        cfg = experiment()
        assert cfg.task.name == "toy"
        assert cfg.solver.hidden == [8, 8]
        assert cfg.solver.lr == 0.01
        assert cfg.data.counts() == (120, 30, 6)
        assert cfg.eval.t_max == 3

    def test_override_wins(self, experiment):
        cfg = experiment("solver.kind=ga", "solver.hidden=4,4,4", "eval.t_max=5")
        assert cfg.solver.kind == "ga"
        assert cfg.solver.hidden == [4, 4, 4]
        assert cfg.eval.t_max == 5

    def test_run_flags(self, experiment):
        cfg = experiment(seed=9, force=True, jobs=None)
        assert cfg.run.seed == 9 and cfg.run.force
        assert cfg.run.jobs == 1
        # solver seed follows the run seed unless set
        assert cfg.solver.seed == 9

    def test_scale_fills_unset(self, tmp_path):
        cfg = load_experiment(None, ["task.name=stack"], out_dir=str(tmp_path), paper_scale=True)
        assert cfg.solver.epochs == 300
        assert cfg.solver.batch_size == 1024
        assert cfg.eval.t_max == 200
        assert cfg.data.counts() == (40_000, 10_000, 500)

    def test_sweep_grid(self, experiment):
        cfg = experiment("sweep.lr=0.01, 0.001", "sweep.hidden=8 8, 16")
        assert cfg.sweep.grid == {"lr": ["0.01", "0.001"], "hidden": [["8", "8"], ["16"]]}
        cells = sweep_cells(cfg)
        assert cells[1] == {"lr": "0.01", "hidden": ["16"]}
        assert len(cells) == 4

    def test_max_cells(self, experiment):
        cfg = experiment("sweep.lr=0.01, 0.001, 0.0001", "sweep.max_cells=2")
        assert len(sweep_cells(cfg)) == 2

    @pytest.mark.parametrize(
        "override",
        ["solver.colour=red", "nothere.kind=nn", "solver.kind", "sweep.colour=1, 2", "data.n_test=", "solver.lr=-1"],
    )
    def test_invalid(self, experiment, override):
        with pytest.raises(ConfigError):
            experiment(override)

    def test_unknown_section_in_file(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[model]\nkind = nn\n")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_experiment(tmp_path / "none.ini")


class TestGenData:
    def test_writes_dataset(self, experiment):
        cfg = experiment()
        result = cmd_gen_data(cfg)
        assert result["ok"]
        assert result["counts"] == {"train": 120, "val": 30, "test": 6}
        assert load_dataset(result["file"], get_task("toy")).counts() == result["counts"]

    def test_same_seed_same_bytes(self, ini, tmp_path):
        a = cmd_gen_data(load_experiment(ini, out_dir=str(tmp_path / "a"), seed=4))
        b = cmd_gen_data(load_experiment(ini, out_dir=str(tmp_path / "b"), seed=4))
        assert a["sha256"] == b["sha256"]

    def test_refuses_overwrite(self, with_data):
        result = cmd_gen_data(with_data())
        assert not result["ok"] and result["exit_code"] == 2
        assert cmd_gen_data(with_data(force=True))["ok"]

    def test_unknown_task(self, experiment):
        assert cmd_gen_data(experiment("task.name=prism"))["exit_code"] == 2


class TestTrain:
    def test_needs_dataset(self, experiment):
        result = cmd_train(experiment())
        assert result["exit_code"] == 4
        assert "dataset" in result["error"]

    def test_train_then_cache_hit(self, with_data):
        cfg = with_data()
        first = cmd_train(cfg)
        assert first["ok"] and not first["cached"]
        assert read_manifest(first["selected"]).val_r1 == first["val_r1"]
        second = cmd_train(cfg)
        assert second["cached"] and second["val_r1"] == first["val_r1"]
        assert len(RunLog(cfg.runs_path()).records()) == 1

        cmd_train(with_data(force=True))
        assert len(RunLog(cfg.runs_path()).records()) == 2

    def test_changed_config_retrains(self, with_data):
        assert not cmd_train(with_data())["cached"]
        assert not cmd_train(with_data("solver.lr=0.02"))["cached"]

    def test_numeric_failure(self, with_data, monkeypatch):
        class Diverging:
            def train(self, ds):
                raise TrainingError("loss is nan at epoch 1")

        monkeypatch.setattr(commands, "make_solver", lambda kind, task, cfg: Diverging())
        cfg = with_data()
        result = cmd_train(cfg)
        assert result["exit_code"] == 3
        (record,) = RunLog(cfg.runs_path()).records()
        assert record.status == "failed" and "TrainingError" in record.diagnostic


class TestSweep:
    def test_selects_lowest_validation_r1(self, with_data):
        cfg = with_data("sweep.lr=0.01, 0.001", "sweep.hidden=8, 4 4")
        result = cmd_sweep(cfg)
        assert result["ok"] and result["cells"] == 4
        records = result["records"]
        assert [r["cell"] for r in records] == [0, 1, 2, 3]
        r1 = [r["val_r1"] for r in records]
        assert result["best_cell"] == int(np.argmin(r1))
        cell = sweep_cells(cfg)[result["best_cell"]]
        assert result["best_config"]["lr"] == float(cell["lr"])
        assert result["best_config"]["hidden"] == [int(h) for h in cell["hidden"]]
        assert read_manifest(result["selected"]).val_r1 == min(r1)

    def test_invalid_cell_is_recorded(self, with_data):
        result = cmd_sweep(with_data("sweep.lr=0, 0.01"))
        assert result["ok"] and result["failed"] == 1
        assert result["best_cell"] == 1
        assert "ConfigError" in result["records"][0]["diagnostic"]

    def test_empty_grid(self, with_data):
        assert cmd_sweep(with_data())["exit_code"] == 2

    def test_cells_are_cached(self, with_data):
        cfg = with_data("sweep.lr=0.01, 0.001")
        cmd_sweep(cfg)
        cmd_sweep(cfg)
        assert len(RunLog(cfg.runs_path()).records()) == 2


class TestEval:
    def test_needs_checkpoint(self, with_data):
        result = cmd_eval(with_data())
        assert result["exit_code"] == 4

    def test_gamma_and_proposal_dump(self, with_data):
        nn_cfg, na_cfg = with_data(), with_data("solver.kind=na")
        assert cmd_train(nn_cfg)["ok"] and cmd_train(na_cfg)["ok"]

        nn = cmd_eval(nn_cfg)
        assert nn["ok"] and nn["gamma"] is None
        assert nn["r1"] == nn["r_tmax"]
        na = cmd_eval(na_cfg)
        assert na["gamma"] == pytest.approx(nn["r1"] / na["r1"])
        assert load_report(nn_cfg.report_dir() / "nn.json").gamma == na["gamma"]

        # r1 recomputed from the dumped first-ranked proposals
        rows = np.loadtxt(na["proposals"], delimiter=",", skiprows=1)
        assert rows.shape == (6 * 3, 4)
        first = rows[rows[:, 1] == 0]
        task = get_task("toy")
        _, targets = load_dataset(na_cfg.dataset_path(), task).test
        errors = np.mean((simulate(task, first[:, 2:]) - targets) ** 2, axis=1)
        assert na["r1"] == pytest.approx(float(np.mean(errors)), rel=1e-12)

    def test_zero_na_error_leaves_gamma_unset(self, with_data):
        cfg = with_data()
        cmd_train(cfg)
        nn = load_report(cmd_eval(cfg)["report"])
        zero = RTCurve.from_errors("na", "toy", np.zeros((6, 3)))
        save_report(cfg.report_dir() / "na.json", nn.model_copy(update={"solver": "na", "curve": zero}))

        result = cmd_eval(cfg)
        assert result["ok"] and result["gamma"] is None
        assert cmd_report(cfg)["ok"]
        rows = (cfg.out / "tables" / "uniqueness.csv").read_text().splitlines()[1:]
        assert [row.split(",")[2] for row in rows] == ["-", "-"]

    def test_report_fields(self, with_data):
        cfg = with_data()
        cmd_train(cfg)
        result = cmd_eval(cfg)
        report = load_report(result["report"])
        assert report.t_max == 3 and report.n_targets == 6
        assert report.curve.T == [1, 2, 3]
        assert report.d_r is not None and report.d_r >= 0
        assert report.n_parameters > 0
        assert report.grid_hash == get_task("toy").grid_hash()
        assert (cfg.report_dir() / "clusters.csv").exists()

    def test_ga_population_below_budget(self, with_data):
        cfg = with_data("solver.kind=ga")
        cmd_train(cfg)
        assert cmd_eval(with_data("solver.kind=ga", "eval.t_max=50"))["exit_code"] == 2


class TestReport:
    def test_tables_and_plots(self, with_data):
        cfg = with_data()
        cmd_train(cfg)
        cmd_eval(cfg)
        result = cmd_report(cfg)
        assert result["ok"] and result["reports"] == 1
        results = (cfg.out / "tables" / "results.csv").read_text().splitlines()
        assert results[0] == "task,T,nn"
        assert results[2].endswith(",-")
        assert all((cfg.out / "tables" / f"rt_{t}.png").exists() for t in ["toy"])

        before = (cfg.out / "tables" / "curves.csv").read_bytes()
        cmd_report(cfg)
        assert (cfg.out / "tables" / "curves.csv").read_bytes() == before

    def test_no_reports(self, experiment):
        assert cmd_report(experiment())["exit_code"] == 4


class TestFitSurrogate:
    def test_surrogate_becomes_a_task(self, with_data, tmp_path):
        cfg = with_data("solver.forward_hidden=8")
        result = cmd_fit_surrogate(cfg)
        assert result["ok"] and result["task"] == "toy-surrogate"
        assert np.isfinite(result["val_mse"])

        task = get_task("toy-surrogate", result["checkpoint"])
        assert (task.d_g, task.d_s) == (2, 32)
        data = load_experiment(
            None,
            ["task.name=toy-surrogate", f"task.checkpoint={result['checkpoint']}", "data.n=20"],
            out_dir=str(tmp_path / "sur"),
        )
        assert cmd_gen_data(data)["ok"]

    def test_refuses_overwrite(self, with_data):
        cfg = with_data("solver.forward_hidden=8")
        cmd_fit_surrogate(cfg)
        assert cmd_fit_surrogate(cfg)["exit_code"] == 2


class TestCli:
    def _run(self, capsys, *argv):
        code = cli.main(list(argv))
        return code, json.loads(capsys.readouterr().out)

    def test_gen_data(self, ini, tmp_path, capsys):
        code, out = self._run(capsys, "gen-data", "--config", str(ini), "--out", str(tmp_path / "o"), "--seed", "2")
        assert code == 0 and out["ok"] and out["seed"] == 2

    def test_config_error(self, ini, tmp_path, capsys):
        code, out = self._run(capsys, "train", "-c", str(ini), "--set", "solver.kind=gan", "--out", str(tmp_path))
        assert code == 2 and out["exit_code"] == 2

    def test_missing_artifact(self, ini, tmp_path, capsys):
        code, _ = self._run(capsys, "eval", "-c", str(ini), "--out", str(tmp_path))
        assert code == 4

    def test_numeric_failure(self, ini, tmp_path, capsys, monkeypatch):
        class Diverging:
            def train(self, ds):
                raise TrainingError("gradient overflow")

        out = str(tmp_path / "o")
        self._run(capsys, "gen-data", "-c", str(ini), "--out", out)
        monkeypatch.setattr(commands, "make_solver", lambda kind, task, cfg: Diverging())
        code, result = self._run(capsys, "train", "-c", str(ini), "--out", out)
        assert code == 3 and not result["ok"]


def test_content_hash_is_key_order_free():
    assert content_hash({"a": 1, "b": [2, 3]}) == content_hash({"b": [2, 3], "a": 1})
