#!/usr/bin/env python3
"""
Test Experiment Runner Module

Artifact layout, resume through the manifest, corrupted and failing cells,
determinism and the worker pool, all on tiny sweeps.
"""

import json
import os
import tempfile

import numpy as np
import pandas as pd
import pytest

import experiments.experiment_runner as runner
from experiments.experiment_config import ExperimentConfig
from experiments.experiment_runner import (
    CELL_FILENAME,
    CELLS_CSV,
    EVALUATIONS_FILENAME,
    FAILING_EPSILON_FILENAME,
    LIPSCHITZ_FILENAME,
    LOCAL_GRID_FILENAME,
    MANIFEST_FILENAME,
    evaluate_cell,
    files_hash,
    load_manifest,
    reward_std,
    run_experiment,
    stable_hash,
    worker_count,
)
from layers.policy_network import build_policy
from metrics.metrics_tracker import METRICS_FILENAME, deterministic_view, load_metrics
from ppo.trainer import FINAL_CHECKPOINT


@pytest.fixture
def single_cell(tiny_experiment):
    tiny_experiment.update(architectures=["sandwich"], seeds=[0])
    return ExperimentConfig.from_dict(tiny_experiment)


def _cell_path(run_dir, cell_id, name=""):
    return os.path.join(run_dir, "cells", cell_id, name)


class TestHashing:
    """Test cases for the manifest hashes."""

    def test_stable_hash_ignores_key_order(self):
        """Test that the hash is over canonical JSON."""
        assert stable_hash({"a": 1, "b": [1, 2]}) == stable_hash({"b": [1, 2], "a": 1})
        assert stable_hash({"a": 1}) != stable_hash({"a": 2})

    def test_files_hash_requires_every_file(self):
        """Test that a missing file gives no hash."""
        with tempfile.TemporaryDirectory() as temp_dir:
            assert files_hash(temp_dir, ["a.json"]) is None
            with open(os.path.join(temp_dir, "a.json"), 'w') as f:
                f.write("{}")
            assert len(files_hash(temp_dir, ["a.json"])) == 64

    def test_worker_count(self, monkeypatch):
        """Test the LIPRL_WORKERS override and its validation."""
        monkeypatch.setenv("LIPRL_WORKERS", "3")
        assert worker_count() == 3
        assert worker_count(2) == 2

        monkeypatch.setenv("LIPRL_WORKERS", "0")
        with pytest.raises(ValueError, match="worker count"):
            worker_count()


class TestEvaluateCell:
    """Test cases for evaluate_cell."""

    def test_reward_std(self):
        """Test the sample std and its single-episode fallback."""
        assert reward_std(np.array([1.0, 3.0])) == pytest.approx(np.sqrt(2.0))
        assert reward_std(np.array([-250.0])) == 0.0

    def test_single_episode_has_finite_std(self, single_cell):
        """Test that one evaluation episode gives std 0, not NaN, for nominal and attacked records."""
        single_cell.eval_episodes = 1
        network = build_policy("sandwich", widths=(8,), gamma=4.0, seed=0)

        with tempfile.TemporaryDirectory() as temp_dir:
            record = evaluate_cell(network, single_cell, temp_dir)
            evaluations = pd.read_csv(os.path.join(temp_dir, EVALUATIONS_FILENAME))

        assert record["nominal"]["std_reward"] == 0.0
        for records in record["attacks"].values():
            assert all(r["std_reward"] == 0.0 for r in records)
        assert (evaluations["episode"] == 0).all()


class TestRunExperiment:
    """Test cases for run_experiment."""

    def test_single_cell_layout(self, single_cell):
        """Test that one cell yields one checkpoint, one metrics stream and one table row."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run = run_experiment(single_cell, temp_dir, workers=1)

            assert run.completed == ["sandwich_g4_s0"]
            assert not run.failed
            for name in (FINAL_CHECKPOINT, METRICS_FILENAME, CELL_FILENAME, EVALUATIONS_FILENAME,
                         LIPSCHITZ_FILENAME, LOCAL_GRID_FILENAME):
                assert os.path.exists(_cell_path(temp_dir, "sandwich_g4_s0", name)), name
            assert not os.path.exists(_cell_path(temp_dir, "sandwich_g4_s0", "checkpoints"))
            assert len(pd.read_csv(os.path.join(temp_dir, CELLS_CSV))) == 1
            for name in ("config.json", MANIFEST_FILENAME, FAILING_EPSILON_FILENAME):
                assert os.path.exists(os.path.join(temp_dir, name))

    def test_cell_record(self, single_cell):
        """Test the contents of cell.json and evaluations.csv."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run_experiment(single_cell, temp_dir, workers=1)

            with open(_cell_path(temp_dir, "sandwich_g4_s0", CELL_FILENAME)) as f:
                record = json.load(f)
            evaluations = pd.read_csv(_cell_path(temp_dir, "sandwich_g4_s0", EVALUATIONS_FILENAME))

            assert record["certified_bound"] == 4.0
            assert record["lower_bound"] <= 4.0 * (1 + 1e-6)
            assert record["parameter_count"] > 0
            assert [r["budget"] for r in record["attacks"]["delay"]] == [0.0, 1.0, 2.0]
            # 4 episodes x (nominal + 3 delays + 2 PGD budgets + 1 trajectory budget)
            assert len(evaluations) == 4 * 7
            assert set(evaluations["attack"]) == {"none", "delay", "pgd_step_l2", "trajectory"}
            assert record["nominal"]["mean_reward"] == pytest.approx(
                evaluations[evaluations["attack"] == "none"]["reward"].mean())

    def test_zero_delay_equals_nominal(self, single_cell):
        """Test that the k = 0 column reproduces the unperturbed rewards."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run_experiment(single_cell, temp_dir, workers=1)
            evaluations = pd.read_csv(_cell_path(temp_dir, "sandwich_g4_s0", EVALUATIONS_FILENAME))

            nominal = evaluations[evaluations["attack"] == "none"]["reward"].to_numpy()
            delayed = evaluations[(evaluations["attack"] == "delay") & (evaluations["budget"] == 0)]["reward"]

            assert list(delayed) == list(nominal)

    def test_failing_epsilon_recorded(self, single_cell):
        """Test that every group gets a threshold per attack sweep."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run = run_experiment(single_cell, temp_dir, workers=1)

            with open(os.path.join(temp_dir, FAILING_EPSILON_FILENAME)) as f:
                document = json.load(f)

            assert set(document["sandwich_g4"]) == {"delay", "pgd_step_l2", "trajectory"}
            assert set(run.failing_epsilon["sandwich_g4"]) == {"delay", "pgd_step_l2", "trajectory"}

    def test_resume_skips_complete_cells(self, single_cell, monkeypatch):
        """Test that a second run trains nothing."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run_experiment(single_cell, temp_dir, workers=1)

            def no_training(*args, **kwargs):
                raise AssertionError("complete cells must not be re-trained")

            monkeypatch.setattr(runner, "train", no_training)
            again = run_experiment(single_cell, temp_dir, workers=1)

            assert again.resumed == ["sandwich_g4_s0"]
            assert again.completed == []
            assert not again.failed

    def test_corrupted_cell_is_rerun(self, single_cell):
        """Test that a cell whose files no longer match the manifest hash is trained again."""
        with tempfile.TemporaryDirectory() as temp_dir:
            run_experiment(single_cell, temp_dir, workers=1)
            path = _cell_path(temp_dir, "sandwich_g4_s0", EVALUATIONS_FILENAME)
            with open(path, 'a') as f:
                f.write("garbage\n")

            again = run_experiment(single_cell, temp_dir, workers=1)

            assert again.completed == ["sandwich_g4_s0"]
            entry = load_manifest(temp_dir)["cells"]["sandwich_g4_s0"]
            assert entry["files_hash"] == files_hash(_cell_path(temp_dir, "sandwich_g4_s0"))

    def test_changed_settings_rerun(self, tiny_experiment):
        """Test that cells trained under other settings are not reused."""
        tiny_experiment.update(architectures=["plain"], seeds=[0])
        with tempfile.TemporaryDirectory() as temp_dir:
            run_experiment(ExperimentConfig.from_dict(tiny_experiment), temp_dir, workers=1)
            tiny_experiment["eval_episodes"] = 3

            again = run_experiment(ExperimentConfig.from_dict(tiny_experiment), temp_dir, workers=1)

            assert again.completed == ["plain_s0"]

    def test_failed_cell_does_not_stop_sweep(self, tiny_experiment, monkeypatch):
        """Test that a failing cell is recorded and the other cells finish."""
        tiny_experiment.update(architectures=["plain"], seeds=[0, 1])
        config = ExperimentConfig.from_dict(tiny_experiment)
        real_train = runner.train

        def flaky_train(env, architecture, ppo, **kwargs):
            if ppo.seed == 1:
                raise FloatingPointError("boom")
            return real_train(env, architecture, ppo, **kwargs)

        monkeypatch.setattr(runner, "train", flaky_train)
        with tempfile.TemporaryDirectory() as temp_dir:
            run = run_experiment(config, temp_dir, workers=1)

            assert run.completed == ["plain_s0"]
            assert run.failed == {"plain_s1": "FloatingPointError: boom"}
            assert load_manifest(temp_dir)["cells"]["plain_s1"]["status"] == "failed"
            assert len(pd.read_csv(os.path.join(temp_dir, CELLS_CSV))) == 1
            assert "plain" in run.failing_epsilon

    def test_deterministic(self, single_cell):
        """Test that two runs of the same config produce identical artifacts."""
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            run_experiment(single_cell, first, workers=1)
            run_experiment(single_cell, second, workers=1)

            for name in (EVALUATIONS_FILENAME, CELL_FILENAME, FINAL_CHECKPOINT):
                with open(_cell_path(first, "sandwich_g4_s0", name)) as a, \
                        open(_cell_path(second, "sandwich_g4_s0", name)) as b:
                    assert a.read() == b.read(), name
            metrics = [deterministic_view(load_metrics(_cell_path(d, "sandwich_g4_s0", METRICS_FILENAME)))
                       for d in (first, second)]
            assert metrics[0] == metrics[1]

    def test_worker_pool_matches_serial(self, tiny_experiment):
        """Test that a two-process sweep writes the same cells as a serial one."""
        tiny_experiment.update(architectures=["plain"], seeds=[0, 1])
        config = ExperimentConfig.from_dict(tiny_experiment)
        with tempfile.TemporaryDirectory() as serial, tempfile.TemporaryDirectory() as pooled:
            run_experiment(config, serial, workers=1)
            run = run_experiment(config, pooled, workers=2)

            assert sorted(run.completed) == ["plain_s0", "plain_s1"]
            for cell_id in ("plain_s0", "plain_s1"):
                with open(_cell_path(serial, cell_id, EVALUATIONS_FILENAME)) as a, \
                        open(_cell_path(pooled, cell_id, EVALUATIONS_FILENAME)) as b:
                    assert a.read() == b.read()
