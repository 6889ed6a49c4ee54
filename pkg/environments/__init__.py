#!/usr/bin/env python3
"""
Environments Package

Differentiable pendulum swing-up, the double-integrator oracle task and rollouts.
"""

from .double_integrator import (
    DoubleIntegratorEnv,
    DoubleIntegratorParams,
    LinearSystem,
    LQRSolution,
    double_integrator_step,
    lqr_oracle,
    solve_riccati,
)
from .environment import Environment, env_streams
from .pendulum import PendulumEnv, PendulumParams, PendulumState, energy, pendulum_step, reward, wrap_angle
from .registry import environment_from_dict, make_environment
from .rollout import (
    NO_PERTURBATION,
    EvaluationResult,
    PerturbationAdapter,
    Trajectory,
    attack_graph,
    evaluate_policy,
    record_rollout,
    rollout,
)

__all__ = [
    'DoubleIntegratorEnv',
    'DoubleIntegratorParams',
    'Environment',
    'EvaluationResult',
    'LQRSolution',
    'LinearSystem',
    'NO_PERTURBATION',
    'PendulumEnv',
    'PendulumParams',
    'PendulumState',
    'PerturbationAdapter',
    'Trajectory',
    'attack_graph',
    'double_integrator_step',
    'energy',
    'env_streams',
    'environment_from_dict',
    'evaluate_policy',
    'lqr_oracle',
    'make_environment',
    'pendulum_step',
    'record_rollout',
    'reward',
    'rollout',
    'solve_riccati',
    'wrap_angle',
]
