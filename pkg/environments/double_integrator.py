#!/usr/bin/env python3
"""
Double Integrator

Discrete double integrator x' = A x + B u with the pendulum's quadratic reward
form, and an LQR oracle that gives the optimal closed-loop cost for checking
the PPO trainer.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar, Dict, Optional, Sequence, Tuple

import numpy as np

from autodiff.errors import RiccatiConvergenceError, ShapeMismatchError
from autodiff.ops import EAGER, Ops
from autodiff.tensor import Tensor, as_tensor
from configuration import (
    DOUBLE_INTEGRATOR_CONTROL_COST,
    DOUBLE_INTEGRATOR_DT,
    DOUBLE_INTEGRATOR_HORIZON,
    DOUBLE_INTEGRATOR_INIT_RANGE,
    DOUBLE_INTEGRATOR_POSITION_COST,
    DOUBLE_INTEGRATOR_VELOCITY_COST,
    RICCATI_MAX_ITERS,
    RICCATI_TOL,
)
from environments.environment import Environment, env_streams
from logger.log_wrapper import get_logger

logger = get_logger("environments:double_integrator", __name__)


@dataclass(frozen=True)
class LinearSystem:
    """x' = A x + B u with stage cost x^T Q x + u^T R u."""
    A: Tensor
    B: Tensor
    Q: Tensor
    R: Tensor

    def __post_init__(self):
        for name in ("A", "B", "Q", "R"):
            object.__setattr__(self, name, as_tensor(getattr(self, name)))
        self._validate_shapes()

    def _validate_shapes(self) -> None:
        n, m = self.B.shape
        if self.A.shape != (n, n):
            raise ShapeMismatchError(f"A must be {n}x{n}, got {self.A.shape}")
        if self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise ShapeMismatchError(f"Q must be {n}x{n} and R {m}x{m}, got {self.Q.shape} and {self.R.shape}")

    def stage_cost(self, x: Tensor, u: Tensor) -> np.ndarray:
        """Per-column x^T Q x + u^T R u."""
        return np.sum(x * (self.Q @ x), axis=0) + np.sum(u * (self.R @ u), axis=0)


@dataclass(frozen=True)
class DoubleIntegratorParams:
    """Constants of the double-integrator task."""
    dt: float = DOUBLE_INTEGRATOR_DT
    position_cost: float = DOUBLE_INTEGRATOR_POSITION_COST
    velocity_cost: float = DOUBLE_INTEGRATOR_VELOCITY_COST
    control_cost: float = DOUBLE_INTEGRATOR_CONTROL_COST
    horizon: int = DOUBLE_INTEGRATOR_HORIZON
    init_range: float = DOUBLE_INTEGRATOR_INIT_RANGE

    def __post_init__(self):
        if self.dt <= 0 or self.horizon < 1 or self.init_range <= 0:
            raise ValueError("dt, horizon and init_range must be positive")
        if self.position_cost < 0 or self.velocity_cost < 0 or self.control_cost <= 0:
            raise ValueError("state costs must be >= 0 and the control cost positive")

    def system(self) -> LinearSystem:
        dt = self.dt
        return LinearSystem(
            A=np.array([[1.0, dt], [0.0, 1.0]]),
            B=np.array([[0.5 * dt * dt], [dt]]),
            Q=np.diag([self.position_cost, self.velocity_cost]),
            R=np.array([[self.control_cost]]),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DoubleIntegratorParams':
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def double_integrator_step(state: Any, u: Any, params: DoubleIntegratorParams, ops: Ops = EAGER) -> Any:
    system = params.system()
    return ops.add(ops.matmul(system.A, state), ops.matmul(system.B, u))


@dataclass(frozen=True)
class DoubleIntegratorEnv(Environment):
    """Unconstrained double integrator; reward is the negative LQR stage cost."""
    params: DoubleIntegratorParams = field(default_factory=DoubleIntegratorParams)

    name: ClassVar[str] = "double_integrator"
    state_labels: ClassVar[Tuple[str, ...]] = ("position", "velocity")
    action_dim: ClassVar[int] = 1

    @property
    def horizon(self) -> int:
        return self.params.horizon

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def action_limit(self) -> float:
        return math.inf

    def reset(self, rngs: Sequence[np.random.Generator]) -> Tensor:
        r = self.params.init_range
        return np.array([rng.uniform(-r, r, size=2) for rng in rngs], dtype=np.float64).T.reshape(2, len(rngs))

    def step(self, states: Any, u: Any, noise: Any = None, ops: Ops = EAGER) -> Any:
        return double_integrator_step(states, u, self.params, ops)

    def reward(self, states: Any, u: Any, ops: Ops = EAGER) -> Any:
        p = self.params
        position = ops.slice_rows(states, 0, 1)
        velocity = ops.slice_rows(states, 1, 2)
        cost = ops.add(ops.add(ops.scale(ops.square(position), p.position_cost),
                               ops.scale(ops.square(velocity), p.velocity_cost)),
                       ops.scale(ops.square(u), p.control_cost))
        return ops.neg(cost)

    def to_dict(self) -> Dict[str, Any]:
        return {"task": self.name, "params": self.params.to_dict()}


@dataclass
class LQRSolution:
    """
    Riccati solution and the cost of the LQR policy u = -K x.

    Attributes:
        P: Fixed point of the discrete algebraic Riccati equation
        K: Optimal feedback gain
        cost: Mean undiscounted cost over the evaluation initial states
        episode_costs: Cost per initial state
        iterations: Riccati iterations used
    """
    P: Tensor
    K: Tensor
    cost: float
    episode_costs: np.ndarray
    iterations: int


def solve_riccati(system: LinearSystem, tol: float = RICCATI_TOL,
                  max_iters: int = RICCATI_MAX_ITERS) -> Tuple[Tensor, int]:
    """
    Fixed-point iteration P <- Q + A^T P A - A^T P B (R + B^T P B)^-1 B^T P A.

    Converges when max |P_k+1 - P_k| <= tol * max(1, max |P_k+1|).

    Raises:
        RiccatiConvergenceError: No fixed point within `max_iters` or a non-finite iterate
    """
    A, B, Q, R = system.A, system.B, system.Q, system.R
    P = Q.copy()
    for iteration in range(1, max_iters + 1):
        BtP = B.T @ P
        gain = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise RiccatiConvergenceError(f"Riccati iteration diverged after {iteration} iterations")
        if np.max(np.abs(P_next - P)) <= tol * max(1.0, np.max(np.abs(P_next))):
            logger.debug(f"Riccati iteration converged in {iteration} iterations")
            return P_next, iteration
        P = P_next
    raise RiccatiConvergenceError(f"Riccati iteration did not converge to {tol} in {max_iters} iterations")


def lqr_gain(system: LinearSystem, P: Tensor) -> Tensor:
    BtP = system.B.T @ P
    return np.linalg.solve(system.R + BtP @ system.B, BtP @ system.A)


def linear_policy_cost(system: LinearSystem, K: Tensor, initial_states: Tensor, horizon: int) -> np.ndarray:
    """Exact undiscounted cost of u = -K x from each initial column over `horizon` steps."""
    x = as_tensor(initial_states)
    total = np.zeros(x.shape[1])
    for _ in range(horizon):
        u = -K @ x
        total += system.stage_cost(x, u)
        x = system.A @ x + system.B @ u
    return total


def evaluation_states(params: DoubleIntegratorParams, episodes: int, seed: int) -> Tensor:
    """Initial states of the evaluation distribution (same streams as rollouts)."""
    return DoubleIntegratorEnv(params).reset(env_streams(seed, episodes))


def lqr_oracle(target: Any, initial_states: Optional[Tensor] = None, horizon: Optional[int] = None,
               episodes: int = 128, seed: int = 0) -> LQRSolution:
    """
    Optimal LQR cost for an initial-state distribution.

    Args:
        target: DoubleIntegratorParams or a LinearSystem
        initial_states: (n, episodes) initial states; drawn from the task's reset distribution if omitted
        horizon: Rollout length (the task horizon for DoubleIntegratorParams)
        episodes: Number of drawn initial states
        seed: Seed of the drawn initial states

    Returns:
        LQRSolution with the mean undiscounted cost of the LQR policy
    """
    if isinstance(target, DoubleIntegratorParams):
        system = target.system()
        horizon = horizon or target.horizon
        if initial_states is None:
            initial_states = evaluation_states(target, episodes, seed)
    else:
        system = target
        if initial_states is None or horizon is None:
            raise ValueError("initial_states and horizon are required for a bare LinearSystem")
    P, iterations = solve_riccati(system)
    K = lqr_gain(system, P)
    costs = linear_policy_cost(system, K, initial_states, horizon)
    logger.info(f"LQR oracle cost {costs.mean():.6g} over {costs.size} initial states")
    return LQRSolution(P=P, K=K, cost=float(costs.mean()), episode_costs=costs, iterations=iterations)


def zero_policy_cost(system: LinearSystem, initial_states: Tensor, horizon: int) -> np.ndarray:
    return linear_policy_cost(system, np.zeros((system.B.shape[1], system.A.shape[0])), initial_states, horizon)

