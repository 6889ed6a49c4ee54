#!/usr/bin/env python3
"""
Attacks Package

Perturbation adapters, per-step PGD and trajectory attacks.
"""

from .adapters import (
    DelayAdapter,
    FixedSequenceAdapter,
    PGDAdapter,
    UniformNoiseAdapter,
    delay_adapter,
    make_adapter,
    uniform_noise_adapter,
)
from .attack_runner import run_attack
from .attack_spec import AttackKind, AttackResult, AttackSpec, Norm, per_step_norm_ok
from .pgd import PGDResult, pgd_step_attack, project
from .trajectory_attack import attack_window, max_output_deviation, trajectory_attack

__all__ = [
    'AttackKind',
    'AttackResult',
    'AttackSpec',
    'DelayAdapter',
    'FixedSequenceAdapter',
    'Norm',
    'PGDAdapter',
    'PGDResult',
    'UniformNoiseAdapter',
    'attack_window',
    'delay_adapter',
    'make_adapter',
    'max_output_deviation',
    'per_step_norm_ok',
    'pgd_step_attack',
    'project',
    'run_attack',
    'trajectory_attack',
]
