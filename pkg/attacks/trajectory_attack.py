#!/usr/bin/env python3
"""
Trajectory Attack

Reward-minimizing observation perturbations over a whole episode. The horizon
is split into windows that are optimized one after another: each window starts
from the attacked state the previous window ended in, runs projected gradient
descent on its share of the discounted return through the recorded rollout
graph, and keeps its best iterate.
"""

from typing import Any, Optional, Tuple

import numpy as np

from attacks.adapters import FixedSequenceAdapter
from attacks.attack_spec import AttackKind, AttackResult, AttackSpec, Norm
from attacks.pgd import ascent_direction, project
from autodiff.graph import backward, evaluate
from autodiff.tensor import Tensor, as_tensor
from configuration import (
    ATTACK_EPSILON,
    PPO_DISCOUNT,
    TRAJECTORY_ITERS,
    TRAJECTORY_WINDOW_LENGTH,
    TRAJECTORY_WINDOWS,
)
from environments.environment import Environment, env_streams
from environments.rollout import Trajectory, attack_graph, mean_function, perturbation_names, rollout, summarize
from logger.log_wrapper import get_logger

logger = get_logger("attacks:trajectory", __name__)


def _window_returns(graph, recorded, discount: float, start_step: int) -> np.ndarray:
    """Per-column discounted reward of the recorded window."""
    return sum(graph.value(r).ravel() * discount ** (start_step + t) for t, r in enumerate(recorded.rewards))


def attack_window(policy: Any, env: Environment, x_start: Tensor, length: int, epsilon: float, iters: int,
                  step_size: float, discount: float = PPO_DISCOUNT,
                  start_step: int = 0) -> Tuple[np.ndarray, Tensor, np.ndarray]:
    """
    Optimize one window of perturbations from zero.

    Returns:
        (best (length, obs_dim, n) sequence, attacked final state, best per-column window return)
    """
    sequence = np.zeros((length,) + x_start.shape)
    graph, recorded = attack_graph(policy, env, x_start, sequence, discount, start_step)
    names = perturbation_names(length)
    best = np.full(x_start.shape[1], np.inf)
    best_sequence = sequence.copy()

    for iteration in range(iters + 1):
        evaluate(graph, dict(zip(names, sequence)))
        window_return = _window_returns(graph, recorded, discount, start_step)
        improved = window_return < best
        best = np.where(improved, window_return, best)
        best_sequence[:, :, improved] = sequence[:, :, improved]
        if iteration == iters:
            break
        grads = backward(graph, recorded.total, wrt=names)
        for t, name in enumerate(names):
            sequence[t] = project(sequence[t] - step_size * ascent_direction(grads[name]), epsilon)

    final_state = evaluate(graph, dict(zip(names, best_sequence)))["final_state"]
    return best_sequence, final_state, best


def max_output_deviation(policy: Any, trajectory: Trajectory) -> float:
    """Largest ||k(x_t + v_t) - k(x_t)|| over steps and episodes."""
    mean = mean_function(policy)
    deviations = [np.linalg.norm(mean(trajectory.observations[t]) - mean(trajectory.states[t]), axis=0).max()
                  for t in range(trajectory.horizon)]
    return float(max(deviations, default=0.0))


def trajectory_attack(policy: Any, env: Environment, epsilon: float = ATTACK_EPSILON,
                      windows: int = TRAJECTORY_WINDOWS, window_length: int = TRAJECTORY_WINDOW_LENGTH,
                      iters: int = TRAJECTORY_ITERS, step_size: Optional[float] = None, seed: int = 0,
                      episodes: int = 1, initial_states: Optional[Tensor] = None,
                      discount: float = PPO_DISCOUNT, horizon: Optional[int] = None) -> AttackResult:
    """
    l2 trajectory attack on the deterministic (mean-action) policy.

    Args:
        policy: Gaussian head, PolicyNetwork or (ops, x) policy
        env: Differentiable environment
        epsilon: Per-step l2 budget
        windows: Number of sequential windows
        window_length: Steps per window
        iters: Gradient steps per window
        step_size: Absolute step size (0.02 epsilon by default)
        seed: Seed of the initial states
        episodes: Parallel episodes (ignored when initial_states is given)
        initial_states: Optional (obs_dim, n) start states
        discount: Discount of the optimized return
        horizon: Episode length (the environment horizon by default)

    Returns:
        AttackResult with attacked return <= nominal return per episode

    Raises:
        ValueError: horizon != windows x window_length
    """
    spec = AttackSpec(kind=AttackKind.TRAJECTORY, epsilon=epsilon, norm=Norm.L2, windows=windows,
                      window_length=window_length, iters=iters, step_size=step_size, seed=seed)
    horizon = horizon or env.horizon
    if horizon != windows * window_length:
        raise ValueError(f"horizon {horizon} must equal windows x window_length = {windows} x {window_length}")
    x0 = env.reset(env_streams(seed, episodes)) if initial_states is None else as_tensor(initial_states).copy()

    nominal = rollout(policy, env, horizon, initial_states=x0, discount=discount)
    sequence = np.zeros((horizon,) + x0.shape)
    if epsilon > 0:
        state = x0
        for window in range(windows):
            start = window * window_length
            window_sequence, state, best = attack_window(policy, env, state, window_length, epsilon, iters,
                                                         spec.resolved_step_size, discount, start)
            sequence[start:start + window_length] = window_sequence
            logger.debug(f"Window {window + 1}/{windows}: discounted window return {best.mean():.4f}")

    attacked = rollout(policy, env, horizon, initial_states=x0, discount=discount,
                       adapter=FixedSequenceAdapter(sequence))
    worse = attacked.returns > nominal.returns
    if np.any(worse):
        logger.warning(f"Attack raised the return of {int(worse.sum())} episode(s); falling back to no perturbation")
        sequence[:, :, worse] = 0.0
        attacked = rollout(policy, env, horizon, initial_states=x0, discount=discount,
                           adapter=FixedSequenceAdapter(sequence))

    result = AttackResult(
        spec=spec,
        perturbations=attacked.perturbations,
        nominal_return=float(nominal.returns.mean()),
        attacked_return=float(attacked.returns.mean()),
        max_deviation=max_output_deviation(policy, attacked),
        iterations=windows * iters if epsilon > 0 else 0,
        stabilized_fraction=summarize(attacked, env).stabilized_fraction,
        attacked_rewards=attacked.returns,
        trajectory=attacked,
        nominal_trajectory=nominal,
    )
    logger.info(f"Trajectory attack eps={epsilon:g}: return {result.nominal_return:.2f} -> "
                f"{result.attacked_return:.2f} over {x0.shape[1]} episode(s)")
    return result
