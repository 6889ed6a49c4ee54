#!/usr/bin/env python3
"""
Report Builder Module

Aggregates the cells of an experiment directory into the summary table, the
reward-vs-budget curves and their cross-sections against the empirical
Lipschitz bound, action contours, local Lipschitz maps, training curves and
parameter counts. Every table is recomputed from the per-episode CSVs and the
cell records; nothing here trains or attacks.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from analysis import plots
from configuration import ATTACK_EPSILON, CONTOUR_RESOLUTION, PENDULUM_DOMAIN
from experiments.experiment_config import ExperimentConfig
from experiments.experiment_runner import (
    CELL_FILENAME,
    CELLS_DIR,
    CONFIG_FILENAME,
    EVALUATIONS_FILENAME,
    FAILING_EPSILON_FILENAME,
    LOCAL_GRID_FILENAME,
    NOMINAL_LABEL,
)
from layers.checkpoint import load_checkpoint
from logger.log_wrapper import get_logger
from metrics.metrics_tracker import METRICS_FILENAME, load_metrics
from ppo.trainer import FINAL_CHECKPOINT

logger = get_logger("analysis:report", __name__)

REPORTS_DIR = "reports"
REPORT_FILENAME = "report.json"
BOUND_TOL = 1e-6
# budgets shown in cross-section plots
SHOWCASE_BUDGETS = {"delay": 2.0}


@dataclass
class Report:
    """
    Files and checks produced by make_reports.

    Attributes:
        directory: reports/ directory
        summary: Summary table, one row per (architecture, gamma)
        files: Written files relative to the reports directory
        missing_cells: Configured cells without a complete record
        bound_violations: Groups whose empirical bound exceeds the certified one
        spearman: Rank correlation between configured gamma (unconstrained last) and mean lower bound
    """
    directory: Path
    summary: pd.DataFrame
    files: List[str] = field(default_factory=list)
    missing_cells: List[str] = field(default_factory=list)
    bound_violations: List[str] = field(default_factory=list)
    spearman: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": len(self.summary),
            "groups": self.summary["group"].tolist(),
            "files": self.files,
            "missing_cells": self.missing_cells,
            "bound_violations": self.bound_violations,
            "spearman_gamma_lower_bound": self.spearman,
        }


class ReportBuilder:
    """Loads experiment artifacts and derives the report tables."""

    def __init__(self, run_dir: str):
        self.run_dir = Path(run_dir)
        if not self.run_dir.exists():
            raise FileNotFoundError(f"Experiment directory not found: {self.run_dir}")
        self.config = self._load_config()

    def _load_config(self) -> Optional[ExperimentConfig]:
        path = self.run_dir / CONFIG_FILENAME
        if not path.exists():
            logger.warning(f"No {CONFIG_FILENAME} in {self.run_dir}; missing cells cannot be listed")
            return None
        with open(path, 'r') as f:
            return ExperimentConfig.from_dict(json.load(f))

    # --- loading -------------------------------------------------------------------

    @staticmethod
    def load_cells(run_dir: Path) -> pd.DataFrame:
        """One row per cell.json found under cells/."""
        rows = []
        for path in sorted((run_dir / CELLS_DIR).glob(f"*/{CELL_FILENAME}")):
            try:
                with open(path, 'r') as f:
                    record = json.load(f)
                rows.append({
                    "cell_id": record["cell_id"],
                    "group": record["group"],
                    "architecture": record["architecture"],
                    "gamma": record["gamma"],
                    "seed": record["seed"],
                    "parameter_count": record["parameter_count"],
                    "certified_bound": record["certified_bound"],
                    "lower_bound": record["lower_bound"],
                    "nominal_stabilized": record["nominal"]["stabilized_fraction"],
                })
            except (KeyError, ValueError) as e:
                logger.error(f"Skipping unreadable cell record {path}: {e}")
        cells = pd.DataFrame(rows)
        logger.info(f"Loaded {len(cells)} cell records from {run_dir}")
        return cells

    @staticmethod
    def load_evaluations(run_dir: Path, cells: pd.DataFrame) -> pd.DataFrame:
        """Per-episode rewards of every cell, joined with the cell identity."""
        frames = []
        for row in cells.itertuples():
            frame = pd.read_csv(run_dir / CELLS_DIR / row.cell_id / EVALUATIONS_FILENAME)
            frames.append(frame.assign(cell_id=row.cell_id, group=row.group, architecture=row.architecture,
                                       gamma=row.gamma, seed=row.seed))
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def load_failing_epsilon(run_dir: Path) -> Dict[str, Dict[str, Any]]:
        path = run_dir / FAILING_EPSILON_FILENAME
        if not path.exists():
            logger.warning(f"No {FAILING_EPSILON_FILENAME}; smallest failing budgets are left empty")
            return {}
        with open(path, 'r') as f:
            return json.load(f)

    # --- tables --------------------------------------------------------------------

    @staticmethod
    def group_index(cells: pd.DataFrame) -> pd.DataFrame:
        """Groups in first-seen order with their architecture and gamma."""
        return cells.drop_duplicates("group")[["group", "architecture", "gamma"]].reset_index(drop=True)

    @staticmethod
    def summary_table(cells: pd.DataFrame, evaluations: pd.DataFrame,
                      failing: Dict[str, Dict[str, Any]]) -> pd.DataFrame:
        """
        Summary table with one row per (architecture, gamma).

        Lower-bound statistics are over policies; reward statistics are over all
        (policy x evaluation episode) runs. Standard deviations use n - 1.
        """
        groups = ReportBuilder.group_index(cells)
        bounds = cells.groupby("group").agg(
            policies=("cell_id", "count"),
            lower_bound_mean=("lower_bound", "mean"),
            lower_bound_std=("lower_bound", "std"),
            lower_bound_max=("lower_bound", "max"),
            certified_bound=("certified_bound", "mean"),
            stabilized_mean=("nominal_stabilized", "mean"),
        )
        nominal = evaluations[evaluations["attack"] == NOMINAL_LABEL].groupby("group")["reward"].agg(
            reward_mean="mean", reward_std="std", episodes="count")
        summary = groups.join(bounds, on="group").join(nominal, on="group")
        summary["tightness"] = summary["lower_bound_mean"] / summary["certified_bound"]

        labels = [label for label in dict.fromkeys(evaluations["attack"]) if label != NOMINAL_LABEL]
        for label in labels:
            summary[f"eps_{label}"] = [failing.get(group, {}).get(label, {}).get("epsilon", np.nan)
                                       for group in summary["group"]]
        return summary

    @staticmethod
    def curves(evaluations: pd.DataFrame) -> pd.DataFrame:
        """Reward against budget per group and attack, nominal rows excluded (sweeps carry their own budget 0)."""
        attacked = evaluations[evaluations["attack"] != NOMINAL_LABEL]
        table = attacked.groupby(["group", "architecture", "gamma", "attack", "budget"], dropna=False,
                                 sort=False)["reward"].agg(reward_mean="mean", reward_std="std",
                                                           episodes="count").reset_index()
        return table

    @staticmethod
    def cross_sections(curves: pd.DataFrame, summary: pd.DataFrame) -> pd.DataFrame:
        """Curves keyed by (gamma, mean lower bound) for plotting reward against the empirical bound."""
        merged = curves.merge(summary[["group", "lower_bound_mean"]], on="group")
        return merged[["attack", "budget", "group", "architecture", "gamma", "lower_bound_mean",
                       "reward_mean", "reward_std"]]

    @staticmethod
    def training_curves(run_dir: Path, cells: pd.DataFrame) -> pd.DataFrame:
        """Deterministic evaluation reward during training, mean and std over seeds."""
        rows = []
        for row in cells.itertuples():
            path = run_dir / CELLS_DIR / row.cell_id / METRICS_FILENAME
            if not path.exists():
                continue
            for record in load_metrics(str(path)):
                if record.get("eval_reward") is not None:
                    rows.append({"group": row.group, "seed": row.seed, "step": record["step"],
                                 "eval_reward": record["eval_reward"]})
        if not rows:
            return pd.DataFrame(columns=["group", "step", "reward_mean", "reward_std", "seeds"])
        return pd.DataFrame(rows).groupby(["group", "step"], sort=False)["eval_reward"].agg(
            reward_mean="mean", reward_std="std", seeds="count").reset_index()

    @staticmethod
    def parameter_counts(cells: pd.DataFrame) -> pd.DataFrame:
        return cells.drop_duplicates("group")[["group", "architecture", "gamma", "parameter_count"]]

    @staticmethod
    def spearman(summary: pd.DataFrame) -> Optional[float]:
        """Rank correlation of configured gamma (unconstrained ranked last) with the mean lower bound."""
        if len(summary) < 2:
            return None
        gammas = summary["gamma"].astype(float).fillna(np.inf)
        rho = stats.spearmanr(gammas, summary["lower_bound_mean"])[0]
        return None if np.isnan(rho) else float(rho)

    @staticmethod
    def bound_violations(summary: pd.DataFrame) -> List[str]:
        constrained = summary[summary["gamma"].notna()]
        violating = constrained[constrained["lower_bound_max"] > constrained["gamma"] * (1 + BOUND_TOL)]
        return violating["group"].tolist()

    # --- grids ---------------------------------------------------------------------

    @staticmethod
    def action_contour(network: Any, resolution: int = CONTOUR_RESOLUTION,
                       domain: Any = PENDULUM_DOMAIN) -> Dict[str, np.ndarray]:
        """Mean action on a resolution x resolution (alpha, alpha_dot) grid, rows alpha."""
        alpha = np.linspace(domain[0][0], domain[0][1], resolution)
        alpha_dot = np.linspace(domain[1][0], domain[1][1], resolution)
        points = np.stack(np.meshgrid(alpha, alpha_dot, indexing="ij"), axis=0).reshape(2, -1)
        actions = network.compiled()(points)[0].reshape(resolution, resolution)
        return {"alpha": alpha, "alpha_dot": alpha_dot, "values": actions}

    @staticmethod
    def save_grid(grid: Dict[str, np.ndarray], path: Path, **metadata: Any) -> Path:
        """Grid CSV (rows alpha, columns alpha_dot) plus a JSON sidecar with the axes."""
        path.parent.mkdir(parents=True, exist_ok=True)
        values = grid["values"]
        pd.DataFrame(values, columns=[f"alpha_dot_{j}" for j in range(values.shape[1])]).to_csv(path, index=False)
        with open(path.with_suffix(".json"), 'w') as f:
            json.dump({"rows": "alpha", "cols": "alpha_dot", "alpha": grid["alpha"].tolist(),
                       "alpha_dot": grid["alpha_dot"].tolist(), **metadata}, f, indent=2)
        return path

    @staticmethod
    def mean_local_grid(run_dir: Path, cell_ids: List[str]) -> Optional[Dict[str, np.ndarray]]:
        """Seed-averaged local Lipschitz map of one group."""
        grids = []
        axes = None
        for cell_id in cell_ids:
            path = run_dir / CELLS_DIR / cell_id / LOCAL_GRID_FILENAME
            if not path.exists():
                continue
            grids.append(pd.read_csv(path).to_numpy())
            with open(path.with_suffix(".json"), 'r') as f:
                axes = json.load(f)
        if not grids:
            return None
        return {"alpha": np.asarray(axes["alpha"]), "alpha_dot": np.asarray(axes["alpha_dot"]),
                "values": np.mean(grids, axis=0)}

    # --- everything ----------------------------------------------------------------

    def missing_cells(self, cells: pd.DataFrame) -> List[str]:
        if self.config is None:
            return []
        present = set(cells["cell_id"]) if not cells.empty else set()
        return [cell.cell_id for cell in self.config.cells() if cell.cell_id not in present]

    def build(self, render: bool = True) -> Report:
        """Write every table (and, with `render`, every SVG) under reports/."""
        cells = self.load_cells(self.run_dir)
        if cells.empty:
            raise FileNotFoundError(f"No completed cells under {self.run_dir / CELLS_DIR}")
        missing = self.missing_cells(cells)
        if missing:
            logger.warning(f"{len(missing)} configured cell(s) missing: {', '.join(missing)}")

        out = self.run_dir / REPORTS_DIR
        out.mkdir(parents=True, exist_ok=True)
        evaluations = self.load_evaluations(self.run_dir, cells)
        summary = self.summary_table(cells, evaluations, self.load_failing_epsilon(self.run_dir))
        report = Report(directory=out, summary=summary, missing_cells=missing,
                        bound_violations=self.bound_violations(summary), spearman=self.spearman(summary))
        if report.bound_violations:
            logger.error(f"Empirical lower bound above gamma in: {', '.join(report.bound_violations)}")

        def table(frame: pd.DataFrame, name: str) -> None:
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False)
            report.files.append(name)

        def figure(name: str, draw, *args) -> None:
            if render:
                path = out / name
                path.parent.mkdir(parents=True, exist_ok=True)
                draw(*args, path)
                report.files.append(name)

        table(summary, "summary.csv")
        curves = self.curves(evaluations)
        cross = self.cross_sections(curves, summary)
        for attack in dict.fromkeys(curves["attack"]):
            table(curves[curves["attack"] == attack], f"curves/{attack}.csv")
            table(cross[cross["attack"] == attack], f"cross_sections/{attack}.csv")
            figure(f"curves/{attack}.svg", plots.plot_curves, curves[curves["attack"] == attack], attack)
            budget = self._showcase_budget(cross[cross["attack"] == attack], attack)
            figure(f"cross_sections/{attack}.svg", plots.plot_cross_section,
                   cross[(cross["attack"] == attack) & (cross["budget"] == budget)], attack, budget)

        training = self.training_curves(self.run_dir, cells)
        table(training, "training_curves.csv")
        figure("training_curves.svg", plots.plot_training_curves, training)
        table(self.parameter_counts(cells), "parameter_counts.csv")

        resolution = self.config.contour_resolution if self.config else CONTOUR_RESOLUTION
        domain = self.config.estimation.domain if self.config else PENDULUM_DOMAIN
        for group, members in cells.groupby("group", sort=False):
            first = members.sort_values("seed").iloc[0]
            network = load_checkpoint(str(self.run_dir / CELLS_DIR / first["cell_id"] / FINAL_CHECKPOINT)).network
            contour = self.action_contour(network, resolution, domain)
            self.save_grid(contour, out / "contours" / f"{group}.csv", cell_id=first["cell_id"])
            report.files.append(f"contours/{group}.csv")
            figure(f"contours/{group}.svg", plots.plot_contour, contour, f"{group} action")
            local = self.mean_local_grid(self.run_dir, members["cell_id"].tolist())
            if local is not None:
                self.save_grid(local, out / "local_lipschitz" / f"{group}.csv", seeds=len(members))
                report.files.append(f"local_lipschitz/{group}.csv")
                figure(f"local_lipschitz/{group}.svg", plots.plot_heatmap, local, f"{group} local Lipschitz")

        with open(out / REPORT_FILENAME, 'w') as f:
            json.dump(report.to_dict(), f, indent=2)
        logger.info(f"Report with {len(summary)} summary rows written to {out}")
        return report

    @staticmethod
    def _showcase_budget(cross: pd.DataFrame, attack: str) -> float:
        """Grid budget closest to the headline setting (0.1 s delay, eps = 0.11)."""
        target = SHOWCASE_BUDGETS.get(attack, ATTACK_EPSILON)
        budgets = np.unique(cross["budget"].to_numpy())
        return float(budgets[np.argmin(np.abs(budgets - target))])


def make_reports(run_dir: str, render: bool = True) -> Report:
    """
    Build the report of an experiment directory.

    Raises:
        FileNotFoundError: Missing directory or no completed cells
    """
    return ReportBuilder(run_dir).build(render)
