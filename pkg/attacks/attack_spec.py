#!/usr/bin/env python3
"""
Attack Settings

Typed description of a perturbation (none, delay, uniform noise, per-step PGD,
trajectory attack) and the result record every attack produces.
"""

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from configuration import (
    ATTACK_EPSILON,
    FEASIBILITY_TOL,
    PGD_STEP_FACTOR,
    PGD_STEPS,
    TRAJECTORY_ITERS,
    TRAJECTORY_STEP_FACTOR,
    TRAJECTORY_WINDOW_LENGTH,
    TRAJECTORY_WINDOWS,
)
from environments.rollout import Trajectory
from logger.log_wrapper import get_logger

logger = get_logger("attacks:spec", __name__)


class AttackKind(Enum):
    NONE = "none"
    DELAY = "delay"
    UNIFORM_NOISE = "uniform_noise"
    PGD_STEP = "pgd_step"
    TRAJECTORY = "trajectory"

    @classmethod
    def parse(cls, value: Any) -> 'AttackKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown attack kind '{value}'. "
                             f"Available: {', '.join(k.value for k in cls)}") from None


class Norm(Enum):
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value: Any) -> 'Norm':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown norm '{value}'. Available: l2, linf") from None

    def of(self, v: np.ndarray) -> np.ndarray:
        """Column norms of a (d, n) array, shape (n,)."""
        if self is Norm.L2:
            return np.linalg.norm(v, axis=0)
        return np.max(np.abs(v), axis=0)


@dataclass(frozen=True)
class AttackSpec:
    """
    One perturbation setting.

    Attributes:
        kind: none, delay, uniform_noise, pgd_step or trajectory
        epsilon: Perturbation budget (ignored by delay and none)
        norm: Budget norm; trajectory attacks are l2 only
        delay: Delay in samples (delay kind)
        steps: PGD iterations per observation
        step_size: Absolute step size (kind default when None)
        windows: Trajectory attack windows
        window_length: Steps per trajectory window
        iters: Gradient steps per trajectory window
        seed: Seed of random starts and noise
    """
    kind: AttackKind = AttackKind.NONE
    epsilon: float = ATTACK_EPSILON
    norm: Norm = Norm.L2
    delay: int = 0
    steps: int = PGD_STEPS
    step_size: Optional[float] = None
    windows: int = TRAJECTORY_WINDOWS
    window_length: int = TRAJECTORY_WINDOW_LENGTH
    iters: int = TRAJECTORY_ITERS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind.parse(self.kind))
        object.__setattr__(self, "norm", Norm.parse(self.norm))
        self._validate_budget()
        self._validate_counts()

    def _validate_budget(self) -> None:
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kind is AttackKind.TRAJECTORY and self.norm is not Norm.L2:
            raise ValueError("trajectory attacks support the l2 norm only")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")

    def _validate_counts(self) -> None:
        if self.delay < 0:
            raise ValueError(f"delay must be >= 0 samples, got {self.delay}")
        for name in ("steps", "windows", "window_length", "iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive count, got {getattr(self, name)}")

    @property
    def resolved_step_size(self) -> float:
        if self.step_size is not None:
            return self.step_size
        if self.kind is AttackKind.TRAJECTORY:
            return TRAJECTORY_STEP_FACTOR * self.epsilon
        return PGD_STEP_FACTOR * self.epsilon / self.steps

    @property
    def budget(self) -> float:
        """Size of the perturbation: delay samples for delays, epsilon otherwise."""
        return float(self.delay) if self.kind is AttackKind.DELAY else self.epsilon

    def with_budget(self, value: float) -> 'AttackSpec':
        if self.kind is AttackKind.DELAY:
            return replace(self, delay=int(round(value)))
        return replace(self, epsilon=float(value))

    @property
    def label(self) -> str:
        """Short column name such as 'pgd_step_l2' or 'delay'."""
        if self.kind in (AttackKind.PGD_STEP, AttackKind.UNIFORM_NOISE):
            return f"{self.kind.value}_{self.norm.value}"
        return self.kind.value

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackSpec':
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "epsilon": self.epsilon,
            "norm": self.norm.value,
            "delay": self.delay,
            "steps": self.steps,
            "step_size": self.step_size,
            "windows": self.windows,
            "window_length": self.window_length,
            "iters": self.iters,
            "seed": self.seed,
        }


@dataclass
class AttackResult:
    """
    Outcome of evaluating a policy under one attack.

    Attributes:
        spec: Attack setting
        perturbations: (T, obs_dim, n) applied observation perturbations
        nominal_return: Mean undiscounted episode reward without perturbation
        attacked_return: Mean undiscounted episode reward under the attack
        max_deviation: Largest per-step ||k(x + v) - k(x)||
        iterations: Optimizer iterations spent (0 for non-optimizing attacks)
        stabilized_fraction: Share of attacked episodes that end stabilized
        attacked_rewards: Per-episode attacked rewards
        trajectory: Attacked trajectory
        nominal_trajectory: Unperturbed trajectory from the same initial states
    """
    spec: AttackSpec
    perturbations: np.ndarray = field(repr=False)
    nominal_return: float
    attacked_return: float
    max_deviation: float
    iterations: int = 0
    stabilized_fraction: float = 0.0
    attacked_rewards: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)
    nominal_trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def per_step_norms(self) -> np.ndarray:
        """(T, n) perturbation norms in the attack norm."""
        if len(self.perturbations) == 0:
            return np.zeros((0, 0))
        return np.stack([self.spec.norm.of(v) for v in self.perturbations])

    def to_dict(self, trajectory_csv: Optional[str] = None) -> Dict[str, Any]:
        norms = self.per_step_norms
        return {
            "spec": self.spec.to_dict(),
            "nominal_return": self.nominal_return,
            "attacked_return": self.attacked_return,
            "max_deviation": self.max_deviation,
            "iterations": self.iterations,
            "stabilized_fraction": self.stabilized_fraction,
            "episodes": int(self.attacked_rewards.size),
            "per_step_norms": norms.max(axis=1).tolist() if norms.size else [],
            "trajectory_csv": trajectory_csv,
        }

    def save(self, directory: str, name: Optional[str] = None) -> str:
        """Write <name>.json and, when available, the first attacked episode as <name>_trajectory.csv."""
        name = name or f"{self.spec.label}_eps{self.spec.budget:g}"
        os.makedirs(directory, exist_ok=True)
        csv_path = None
        if self.trajectory is not None:
            csv_path = self.trajectory.save_csv(os.path.join(directory, f"{name}_trajectory.csv"))
        json_path = os.path.join(directory, f"{name}.json")
        with open(json_path, 'w') as f:
            json.dump(self.to_dict(csv_path), f, indent=2)
        logger.info(f"Saved attack result to: {json_path}")
        return json_path


def per_step_norm_ok(perturbations: np.ndarray, epsilon: float, norm: Norm, tol: float = FEASIBILITY_TOL) -> bool:
    """Whether every column of every step lies in the epsilon-ball."""
    return all(bool(np.all(norm.of(v) <= epsilon + tol)) for v in perturbations)

