#!/usr/bin/env python3
"""
SVG figures for the report: reward curves, cross-sections against the
empirical Lipschitz bound, action contours and local Lipschitz heatmaps.
"""

from pathlib import Path
from typing import Dict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

sns.set_theme(style="whitegrid")


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _band(ax, frame: pd.DataFrame, x: str, label: str) -> None:
    """Mean line with a one-std band."""
    frame = frame.sort_values(x)
    mean = frame["reward_mean"].to_numpy()
    std = frame["reward_std"].fillna(0.0).to_numpy()
    ax.plot(frame[x], mean, marker="o", label=label)
    ax.fill_between(frame[x], mean - std, mean + std, alpha=0.2)


def plot_curves(curves: pd.DataFrame, attack: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for group, frame in curves.groupby("group", sort=False):
        _band(ax, frame, "budget", group)
    ax.set_xlabel("delay (samples)" if attack == "delay" else "budget")
    ax.set_ylabel("episode reward")
    ax.set_title(attack)
    ax.legend(fontsize="small")
    _save(fig, path)


def plot_cross_section(cross: pd.DataFrame, attack: str, budget: float, path: Path) -> None:
    """Reward at one budget against the mean empirical Lipschitz bound of each group."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(cross["lower_bound_mean"], cross["reward_mean"], yerr=cross["reward_std"].fillna(0.0),
                fmt="none", ecolor="grey", alpha=0.6)
    sns.scatterplot(data=cross, x="lower_bound_mean", y="reward_mean", hue="architecture", ax=ax)
    for row in cross.itertuples():
        ax.annotate(row.group, (row.lower_bound_mean, row.reward_mean), fontsize="x-small")
    ax.set_xlabel("empirical Lipschitz lower bound")
    ax.set_ylabel("episode reward")
    ax.set_title(f"{attack} at {budget:g}")
    _save(fig, path)


def plot_training_curves(training: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for group, frame in training.groupby("group", sort=False):
        _band(ax, frame, "step", group)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("evaluation reward")
    if not training.empty:
        ax.legend(fontsize="small")
    _save(fig, path)


def plot_contour(grid: Dict[str, np.ndarray], title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    filled = ax.contourf(grid["alpha"], grid["alpha_dot"], grid["values"].T, levels=20, cmap="coolwarm")
    fig.colorbar(filled, ax=ax)
    ax.set_xlabel("alpha (rad)")
    ax.set_ylabel("alpha_dot (rad/s)")
    ax.set_title(title)
    _save(fig, path)


def plot_heatmap(grid: Dict[str, np.ndarray], title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    frame = pd.DataFrame(grid["values"].T[::-1], index=np.round(grid["alpha_dot"][::-1], 2),
                         columns=np.round(grid["alpha"], 2))
    sns.heatmap(frame, ax=ax, cmap="viridis", xticklabels="auto", yticklabels="auto")
    ax.set_xlabel("alpha (rad)")
    ax.set_ylabel("alpha_dot (rad/s)")
    ax.set_title(title)
    _save(fig, path)
