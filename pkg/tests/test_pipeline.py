"""End-to-end pipeline: simulate, export, train, deploy, compare."""

import json
import os

import numpy as np
import pytest

from mrsim import models
from mrsim.cli import main
from mrsim.config import load_run_config, run_matrix, run_simulation
from mrsim.features import export_dataset

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.fixture(scope="module")
def sim_dataset():
    cfg = load_run_config(os.path.join(CONFIG_DIR, "scenario_standard.yaml"))
    result, _ = run_simulation(cfg, seed=500, scheduler_name="fifo",
                               collect_trace=False)
    return export_dataset(result.attempt_log).filter_type("MAP")


class TestForestMonotonicity:
    def test_more_trees_do_not_hurt(self, sim_dataset):
        means = {}
        for n_trees in (1, 50):
            vals = [models.cross_validate(sim_dataset, "forest",
                                          {"n_trees": n_trees},
                                          np.random.default_rng(seed)).mean()["accuracy"]
                    for seed in range(5)]
            means[n_trees] = sum(vals) / len(vals)
        assert means[50] >= means[1] - 0.02


class TestParallelCompare:
    def test_worker_pool_matches_sequential(self):
        cfg = load_run_config(os.path.join(CONFIG_DIR, "scenario_standard.yaml"))
        seq = run_matrix(cfg, ["fifo"], [31, 32], workers=1)
        par = run_matrix(cfg, ["fifo"], [31, 32], workers=2)
        assert json.dumps(seq, sort_keys=True) == json.dumps(par, sort_keys=True)


class TestCliPipeline:
    def test_run_export_train_compare(self, tmp_path, capsys):
        """The full workflow through the command line."""
        scenario = os.path.join(CONFIG_DIR, "scenario_standard.yaml")

        attempts = tmp_path / "attempts.jsonl"
        assert main(["run", "--config", scenario, "--seed", "900",
                     "--out", str(tmp_path / "report.json"),
                     "--attempts", str(attempts)]) == 0

        dataset = tmp_path / "dataset.csv"
        assert main(["export-dataset", str(attempts), str(dataset)]) == 0

        assert main(["train", str(dataset), "--kind", "tree",
                     "--out", str(tmp_path / "model")]) == 0
        assert (tmp_path / "model.map.json").exists()
        assert (tmp_path / "model.reduce.json").exists()

        # scenario copy wired to the freshly trained models
        scen = tmp_path / "scenario.yaml"
        scen.write_text(
            f"cluster: {os.path.abspath(os.path.join(CONFIG_DIR, 'cluster20.yaml'))}\n"
            f"workload: {os.path.abspath(os.path.join(CONFIG_DIR, 'workload_mixed.yaml'))}\n"
            f"failure_plan: {os.path.abspath(os.path.join(CONFIG_DIR, 'failures_standard.yaml'))}\n"
            "scheduler: fifo\nseed: 1\nhorizon_ms: 14400000\n"
            "atlas:\n  base: fifo\n"
            f"  map_model: {tmp_path / 'model.map.json'}\n"
            f"  reduce_model: {tmp_path / 'model.reduce.json'}\n")
        assert main(["compare", "--scenario", str(scen),
                     "--schedulers", "fifo,atlas", "--seeds", "41,42,43",
                     "--out", str(tmp_path / "cmp")]) == 0
        table = json.loads((tmp_path / "cmp.json").read_text())
        assert {r["scheduler"] for r in table["rows"]} == {"fifo", "atlas"}
        assert (tmp_path / "cmp.csv").exists()
        out = capsys.readouterr().out
        assert "atlas:" in out and "fifo:" in out

    def test_decision_log_written_for_atlas(self, tmp_path):
        scenario = os.path.join(CONFIG_DIR, "scenario_standard.yaml")
        decisions = tmp_path / "decisions.jsonl"
        assert main(["run", "--config", scenario, "--seed", "901",
                     "--scheduler", "atlas",
                     "--out", str(tmp_path / "r.json"),
                     "--decisions", str(decisions)]) == 0
        lines = [json.loads(l) for l in decisions.read_text().splitlines()]
        assert lines
        assert all("decision" in rec and "at" in rec for rec in lines)

    def test_runtime_error_exit_code(self, tmp_path, monkeypatch, capsys):
        import mrsim.cli as cli

        def boom(*args, **kwargs):
            raise RuntimeError("engine exploded")

        monkeypatch.setattr(cli, "run_simulation", boom)
        scenario = os.path.join(CONFIG_DIR, "scenario_standard.yaml")
        assert main(["run", "--config", scenario,
                     "--out", str(tmp_path / "r.json")]) == 3
        assert "engine exploded" in capsys.readouterr().err
