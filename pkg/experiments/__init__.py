#!/usr/bin/env python3
"""
Experiments Package

Sweep configuration, the cell runner with its resumable manifest, and
smallest-failing-budget search.
"""

from .experiment_config import (
    AttackSettings,
    AttackSweep,
    Cell,
    ExperimentConfig,
    LipschitzSettings,
    TrainSettings,
    default_attacks,
    load_config,
)
from .experiment_runner import ExperimentRun, run_cell, run_experiment, stable_hash
from .robustness import FailingEpsilon, smallest_failing_epsilon

__all__ = [
    'AttackSettings',
    'AttackSweep',
    'Cell',
    'ExperimentConfig',
    'ExperimentRun',
    'FailingEpsilon',
    'LipschitzSettings',
    'TrainSettings',
    'default_attacks',
    'load_config',
    'run_cell',
    'run_experiment',
    'smallest_failing_epsilon',
    'stable_hash',
]
