#!/usr/bin/env python3
"""
Tests for the ReportBuilder module.
"""

import json
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from analysis.report_builder import REPORTS_DIR, ReportBuilder, make_reports
from layers.policy_network import build_policy


@pytest.fixture(scope="module")
def report(tiny_sweep_dir):
    return make_reports(str(tiny_sweep_dir))


class TestMakeReports:
    """Test cases for make_reports on a finished tiny sweep."""

    def test_summary_rows(self, report):
        """Test one row per (architecture, gamma) with the policy count."""
        summary = report.summary

        assert summary["group"].tolist() == ["plain", "sandwich_g4"]
        assert summary["policies"].tolist() == [2, 2]
        assert np.isnan(summary.loc[0, "gamma"])
        assert summary.loc[1, "certified_bound"] == 4.0
        for label in ("delay", "pgd_step_l2", "trajectory"):
            assert f"eps_{label}" in summary.columns

    def test_reward_statistics_over_all_episodes(self, report, tiny_sweep_dir):
        """Test that the reward std pools every episode of every seed with n - 1."""
        rewards = []
        for seed in (0, 1):
            frame = pd.read_csv(tiny_sweep_dir / "cells" / f"sandwich_g4_s{seed}" / "evaluations.csv")
            rewards.extend(frame[frame["attack"] == "none"]["reward"])

        row = report.summary[report.summary["group"] == "sandwich_g4"].iloc[0]

        assert row["episodes"] == 8
        assert row["reward_mean"] == pytest.approx(np.mean(rewards))
        assert row["reward_std"] == pytest.approx(np.std(rewards, ddof=1))

    def test_bounds_hold(self, report):
        """Test that no constrained group exceeds its certified bound."""
        assert report.bound_violations == []
        sandwich = report.summary[report.summary["group"] == "sandwich_g4"].iloc[0]
        assert sandwich["lower_bound_max"] <= 4.0 * (1 + 1e-6)
        assert 0.0 < sandwich["tightness"] <= 1.0 + 1e-6

    def test_files(self, report, tiny_sweep_dir):
        """Test that every table, grid and figure is written and listed."""
        out = tiny_sweep_dir / REPORTS_DIR
        for name in ("summary.csv", "training_curves.csv", "parameter_counts.csv", "curves/delay.csv",
                     "curves/delay.svg", "cross_sections/trajectory.csv", "contours/plain.csv",
                     "contours/sandwich_g4.svg", "local_lipschitz/sandwich_g4.csv", "training_curves.svg"):
            assert (out / name).exists(), name
            assert name in report.files

        with open(out / "report.json") as f:
            document = json.load(f)
        assert document["groups"] == ["plain", "sandwich_g4"]
        assert document["missing_cells"] == []

    def test_curves(self, tiny_sweep_dir, report):
        """Test the delay curve covers the configured budgets per group."""
        curves = pd.read_csv(tiny_sweep_dir / REPORTS_DIR / "curves" / "delay.csv")

        for group in ("plain", "sandwich_g4"):
            assert curves[curves["group"] == group]["budget"].tolist() == [0.0, 1.0, 2.0]
        assert (curves["episodes"] == 8).all()

    def test_grids(self, tiny_sweep_dir, report):
        """Test contour and local Lipschitz grid shapes and sidecars."""
        out = tiny_sweep_dir / REPORTS_DIR
        contour = pd.read_csv(out / "contours" / "plain.csv")
        local = pd.read_csv(out / "local_lipschitz" / "plain.csv")
        with open(out / "contours" / "plain.json") as f:
            sidecar = json.load(f)

        assert contour.shape == (5, 5)
        assert local.shape == (3, 3)
        assert sidecar["cell_id"] == "plain_s0"
        assert sidecar["alpha"][0] == pytest.approx(-np.pi)

    def test_training_curves(self, tiny_sweep_dir, report):
        """Test that evaluation rewards are averaged over both seeds."""
        training = pd.read_csv(tiny_sweep_dir / REPORTS_DIR / "training_curves.csv")

        assert set(training["group"]) == {"plain", "sandwich_g4"}
        assert (training["seeds"] == 2).all()

    def test_missing_cells_listed(self, tiny_sweep_dir, report):
        """Test that a sweep with a lost cell still reports and names the gap."""
        with tempfile.TemporaryDirectory() as temp_dir:
            copy_dir = Path(temp_dir) / "sweep"
            shutil.copytree(tiny_sweep_dir, copy_dir)
            shutil.rmtree(copy_dir / "cells" / "plain_s1")

            partial = ReportBuilder(str(copy_dir)).build(render=False)

            assert partial.missing_cells == ["plain_s1"]
            assert partial.summary["policies"].tolist() == [1, 2]

    def test_no_cells(self):
        """Test that an empty directory is an error."""
        with tempfile.TemporaryDirectory() as temp_dir:
            with pytest.raises(FileNotFoundError, match="No completed cells"):
                make_reports(temp_dir)

        with pytest.raises(FileNotFoundError):
            make_reports("/nonexistent/sweep")


class TestReportTables:
    """Test cases for the table helpers on synthetic inputs."""

    def test_spearman_ranks_unconstrained_last(self):
        """Test the gamma / lower-bound rank correlation."""
        summary = pd.DataFrame({"gamma": [np.nan, 4.0, 8.0], "lower_bound_mean": [12.0, 2.0, 5.0]})

        assert ReportBuilder.spearman(summary) == pytest.approx(1.0)
        assert ReportBuilder.spearman(summary.iloc[:1]) is None

    def test_spearman_undefined(self):
        """Test that constant bounds give no correlation."""
        summary = pd.DataFrame({"gamma": [4.0, 8.0], "lower_bound_mean": [3.0, 3.0]})

        assert ReportBuilder.spearman(summary) is None

    def test_curves_leave_out_nominal(self):
        """Test that nominal rows do not appear as an attack in the curves."""
        evaluations = pd.DataFrame({
            "group": ["plain"] * 4, "architecture": ["plain"] * 4, "gamma": [np.nan] * 4,
            "attack": ["none", "none", "delay", "delay"], "budget": [0.0, 0.0, 1.0, 1.0],
            "reward": [-100.0, -120.0, -300.0, -500.0],
        })

        curves = ReportBuilder.curves(evaluations)

        assert "none" not in curves["attack"].tolist()
        assert curves["budget"].tolist() == [1.0]
        assert curves["reward_mean"].tolist() == [-400.0]
        assert curves["episodes"].tolist() == [2]

    def test_bound_violations(self):
        """Test that only constrained groups above gamma are flagged."""
        summary = pd.DataFrame({"group": ["plain", "sandwich_g4", "sandwich_g8"],
                                "gamma": [np.nan, 4.0, 8.0], "lower_bound_max": [50.0, 4.2, 7.9]})

        assert ReportBuilder.bound_violations(summary) == ["sandwich_g4"]

    def test_action_contour(self):
        """Test that the contour holds the policy action at each grid point."""
        network = build_policy("plain", widths=(8,), seed=0)

        grid = ReportBuilder.action_contour(network, resolution=5)

        assert grid["values"].shape == (5, 5)
        corner = network(np.array([[grid["alpha"][0]], [grid["alpha_dot"][4]]]))
        assert grid["values"][0, 4] == pytest.approx(corner[0, 0])
