#!/usr/bin/env python3
"""
Pendulum Swing-Up

Torque-limited pendulum with alpha = 0 upright. States are (2, n) column
batches of (alpha, alpha_dot); the step and reward are written against `Ops`
so rollouts can be recorded and differentiated wrt observation perturbations.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.ops import EAGER, Ops
from autodiff.tensor import Tensor, as_tensor
from configuration import (
    PENDULUM_DAMPING,
    PENDULUM_DT,
    PENDULUM_GRAVITY,
    PENDULUM_HORIZON,
    PENDULUM_INIT_VELOCITY,
    PENDULUM_LENGTH,
    PENDULUM_MASS,
    PENDULUM_NOISE_SCALE,
    PENDULUM_TORQUE_LIMIT,
)
from environments.environment import Environment

ANGLE_COST = 1.0
VELOCITY_COST = 0.1
TORQUE_COST = 0.001


@dataclass(frozen=True)
class PendulumParams:
    """
    Physical constants of the pendulum.

    Attributes:
        mass: kg
        length: m
        gravity: m/s^2
        damping: Viscous damping, N.m.s
        dt: Integration step, s
        torque_limit: Actuator limit, N.m
        horizon: Episode length in steps
        noise_scale: Std of the additive process torque noise, N.m
    """
    mass: float = PENDULUM_MASS
    length: float = PENDULUM_LENGTH
    gravity: float = PENDULUM_GRAVITY
    damping: float = PENDULUM_DAMPING
    dt: float = PENDULUM_DT
    torque_limit: float = PENDULUM_TORQUE_LIMIT
    horizon: int = PENDULUM_HORIZON
    noise_scale: float = PENDULUM_NOISE_SCALE

    def __post_init__(self):
        self._validate_params()

    def _validate_params(self) -> None:
        for name in ("mass", "length", "gravity", "dt", "torque_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Pendulum {name} must be positive, got {getattr(self, name)}")
        if self.damping < 0:
            raise ValueError(f"Pendulum damping must be >= 0, got {self.damping}")
        if self.noise_scale < 0:
            raise ValueError(f"Pendulum noise_scale must be >= 0, got {self.noise_scale}")
        if self.horizon < 1:
            raise ValueError(f"Pendulum horizon must be >= 1, got {self.horizon}")
        if self.torque_limit >= self.mass * self.gravity * self.length:
            raise ValueError(
                f"torque_limit {self.torque_limit} must be below m*g*l = "
                f"{self.mass * self.gravity * self.length:.4f} so that swing-up requires pumping")

    @property
    def inertia(self) -> float:
        return self.mass * self.length ** 2

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PendulumParams':
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PendulumState:
    """A single pendulum state; batches are (2, n) arrays."""
    alpha: float
    alpha_dot: float

    def as_column(self) -> Tensor:
        return np.array([[self.alpha], [self.alpha_dot]], dtype=np.float64)

    @classmethod
    def from_column(cls, column: Any) -> 'PendulumState':
        column = as_tensor(column)
        return cls(float(column[0, 0]), float(column[1, 0]))


def wrap_angle(alpha: Any) -> Any:
    """Map angles to [-pi, pi); pi maps to -pi."""
    wrapped = np.mod(np.asarray(alpha, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def pendulum_step(state: Any, u: Any, params: PendulumParams, noise: Any = None, ops: Ops = EAGER) -> Any:
    """
    Semi-implicit Euler step.

    alpha_dot' = alpha_dot + dt ((g/l) sin alpha + (u + w)/(m l^2) - (c/(m l^2)) alpha_dot)
    alpha' = wrap(alpha + dt alpha_dot')

    Args:
        state: (2, n) states
        u: (1, n) torques, clipped to the torque limit inside the step
        params: Physical constants
        noise: Optional (1, n) process torque noise w
        ops: Eager or graph backend

    Returns:
        (2, n) next states
    """
    alpha = ops.slice_rows(state, 0, 1)
    alpha_dot = ops.slice_rows(state, 1, 2)
    torque = ops.clip(u, -params.torque_limit, params.torque_limit)
    if noise is not None:
        torque = ops.add(torque, noise)
    acceleration = ops.add(ops.scale(ops.sin(alpha), params.gravity / params.length),
                           ops.scale(torque, 1.0 / params.inertia))
    if params.damping:
        acceleration = ops.sub(acceleration, ops.scale(alpha_dot, params.damping / params.inertia))
    next_alpha_dot = ops.add(alpha_dot, ops.scale(acceleration, params.dt))
    next_alpha = ops.wrap_angle(ops.add(alpha, ops.scale(next_alpha_dot, params.dt)))
    return ops.concat_rows([next_alpha, next_alpha_dot])


def reward(state: Any, u: Any, ops: Ops = EAGER) -> Any:
    """r = -(alpha^2 + 0.1 alpha_dot^2 + 0.001 u^2) per column, shape (1, n)."""
    alpha = ops.slice_rows(state, 0, 1)
    alpha_dot = ops.slice_rows(state, 1, 2)
    cost = ops.add(ops.add(ops.scale(ops.square(alpha), ANGLE_COST),
                           ops.scale(ops.square(alpha_dot), VELOCITY_COST)),
                   ops.scale(ops.square(u), TORQUE_COST))
    return ops.neg(cost)


def energy(state: Any, params: PendulumParams) -> np.ndarray:
    """Total energy 1/2 m l^2 alpha_dot^2 + m g l cos(alpha) per column."""
    state = as_tensor(state)
    return (0.5 * params.inertia * state[1] ** 2
            + params.mass * params.gravity * params.length * np.cos(state[0]))


@dataclass(frozen=True)
class PendulumEnv(Environment):
    """Pendulum swing-up task."""
    params: PendulumParams = field(default_factory=PendulumParams)

    name: ClassVar[str] = "pendulum"
    state_labels: ClassVar[Tuple[str, ...]] = ("alpha", "alpha_dot")
    action_dim: ClassVar[int] = 1

    @property
    def horizon(self) -> int:
        return self.params.horizon

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def action_limit(self) -> float:
        return self.params.torque_limit

    def reset(self, rngs: Sequence[np.random.Generator]) -> Tensor:
        """alpha ~ U(-pi, pi), alpha_dot ~ U(-1, 1) per environment stream."""
        columns = [[rng.uniform(-math.pi, math.pi), rng.uniform(-PENDULUM_INIT_VELOCITY, PENDULUM_INIT_VELOCITY)]
                   for rng in rngs]
        states = np.array(columns, dtype=np.float64).T.reshape(2, len(rngs))
        states[0] = wrap_angle(states[0])
        return states

    def sample_noise(self, rngs: Sequence[np.random.Generator]) -> Optional[Tensor]:
        if self.params.noise_scale == 0:
            return None
        return self.params.noise_scale * np.array([[rng.standard_normal() for rng in rngs]])

    def step(self, states: Any, u: Any, noise: Any = None, ops: Ops = EAGER) -> Any:
        return pendulum_step(states, u, self.params, noise, ops)

    def reward(self, states: Any, u: Any, ops: Ops = EAGER) -> Any:
        return reward(states, u, ops)

    def to_dict(self) -> Dict[str, Any]:
        return {"task": self.name, "params": self.params.to_dict()}


def hanging_state(n: int = 1) -> Tensor:
    """Columns at the hanging equilibrium (alpha = -pi, the wrapped form of pi)."""
    return np.tile(np.array([[-math.pi], [0.0]]), (1, n))


def state_grid(domain: Sequence[Tuple[float, float]], resolution: int) -> Tuple[np.ndarray, np.ndarray, Tensor]:
    """Regular (alpha, alpha_dot) grid; returns the axes and the (2, rows*cols) columns in row-major order."""
    alpha = np.linspace(domain[0][0], domain[0][1], resolution)
    alpha_dot = np.linspace(domain[1][0], domain[1][1], resolution)
    columns: List[np.ndarray] = [g.ravel() for g in np.meshgrid(alpha, alpha_dot, indexing="ij")]
    return alpha, alpha_dot, np.stack(columns, axis=0)
