#!/usr/bin/env python3
"""
Shared pytest setup: the slow-test switch and a tiny sweep configuration.
"""

import copy
from typing import Any, Dict

import pytest

collect_ignore = ["examples"]

# Sweep small enough to train, attack and report in seconds
TINY_EXPERIMENT: Dict[str, Any] = {
    "name": "tiny",
    "task": "pendulum",
    "env_params": {"horizon": 20},
    "architectures": ["plain", "sandwich"],
    "gammas": [4.0],
    "widths": {"plain": [8], "sandwich": [8]},
    "seeds": [0, 1],
    "ppo": {"num_envs": 4, "rollout_length": 10, "total_steps": 40, "epochs": 1, "minibatch_size": 20,
            "eval_episodes": 4, "eval_interval": 1},
    "attacks": [
        {"kind": "delay", "budgets": [0, 1, 2]},
        {"kind": "pgd_step", "norm": "l2", "steps": 3, "budgets": [0.05, 0.1]},
        {"kind": "trajectory", "windows": 2, "window_length": 10, "iters": 2, "budgets": [0.1]},
    ],
    "estimation": {"restarts": 2, "iters": 5, "grid_resolution": 3, "grid_restarts": 1},
    "eval_episodes": 4,
    "contour_resolution": 5,
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance run, enabled with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_experiment() -> Dict[str, Any]:
    """A fresh copy of the tiny sweep document."""
    return copy.deepcopy(TINY_EXPERIMENT)


@pytest.fixture(scope="session")
def tiny_sweep_dir(tmp_path_factory):
    """Directory holding one finished run of the tiny sweep, shared by the report tests."""
    from experiments.experiment_config import ExperimentConfig
    from experiments.experiment_runner import run_experiment

    run_dir = tmp_path_factory.mktemp("tiny_sweep")
    run_experiment(ExperimentConfig.from_dict(copy.deepcopy(TINY_EXPERIMENT)), str(run_dir), workers=1)
    return run_dir
