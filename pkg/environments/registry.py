#!/usr/bin/env python3
"""
Environment Registry

Builds environments from their JSON description {task, params}.
"""

from typing import Any, Dict, Optional

from environments.double_integrator import DoubleIntegratorEnv, DoubleIntegratorParams
from environments.environment import Environment
from environments.pendulum import PendulumEnv, PendulumParams

TASKS = {
    PendulumEnv.name: (PendulumEnv, PendulumParams),
    DoubleIntegratorEnv.name: (DoubleIntegratorEnv, DoubleIntegratorParams),
}


def make_environment(task: str, params: Optional[Dict[str, Any]] = None) -> Environment:
    """
    Create an environment by task name.

    Args:
        task: 'pendulum' or 'double_integrator'
        params: Overrides of the task's default constants

    Raises:
        ValueError: Unknown task or invalid constants
    """
    if task not in TASKS:
        raise ValueError(f"Unknown task '{task}'. Available: {', '.join(TASKS)}")
    env_type, params_type = TASKS[task]
    return env_type(params_type.from_dict(params or {}))


def environment_from_dict(document: Dict[str, Any]) -> Environment:
    return make_environment(document["task"], document.get("params"))
