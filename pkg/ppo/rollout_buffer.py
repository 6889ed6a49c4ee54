#!/usr/bin/env python3
"""
Rollout Buffer

Flattens a stochastic rollout into a PPO batch with GAE advantages.
"""

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from environments.rollout import Trajectory

ADVANTAGE_EPS = 1e-8


def gae(rewards: np.ndarray, values: np.ndarray, dones: Optional[np.ndarray], discount: float,
        lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimation over (T, n) arrays.

    delta_t = r_t + rho V(x_t+1) (1 - done_t) - V(x_t)
    A_t = delta_t + rho lambda (1 - done_t) A_t+1

    Args:
        rewards: (T, n) rewards
        values: (T + 1, n) value predictions including the bootstrap row
        dones: (T, n) episode-end flags after step t (None for no terminations)
        discount: rho
        lam: lambda

    Returns:
        (advantages, returns) with returns = advantages + V(x_t)
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.ndim == 1:
        rewards, values = rewards[:, None], values[:, None]
        dones = None if dones is None else np.asarray(dones, dtype=np.float64)[:, None]
    horizon = rewards.shape[0]
    if values.shape != (horizon + 1,) + rewards.shape[1:]:
        raise ValueError(f"values must have shape {(horizon + 1,) + rewards.shape[1:]}, got {values.shape}")
    not_done = np.ones_like(rewards) if dones is None else 1.0 - np.asarray(dones, dtype=np.float64)

    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(horizon)):
        delta = rewards[t] + discount * values[t + 1] * not_done[t] - values[t]
        running = delta + discount * lam * not_done[t] * running
        advantages[t] = running
    returns = advantages + values[:-1]
    return advantages, returns


@dataclass
class RolloutBatch:
    """
    Flattened transitions (columns ordered t-major: column t * n + i).

    Attributes:
        observations: (obs_dim, N) observations
        actions: (action_dim, N) sampled (unclipped) actions
        log_probs: (1, N) log-probabilities under the behavior policy
        rewards: (T, n) rewards
        values: (T + 1, n) value predictions with bootstrap row
        dones: (T, n) done flags
        advantages: (1, N) normalized advantages
        returns: (1, N) returns-to-go (unnormalized advantages + values)
    """
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    @property
    def size(self) -> int:
        return self.observations.shape[1]

    def minibatches(self, minibatch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
        """Shuffled column index sets covering the batch once."""
        order = rng.permutation(self.size)
        for start in range(0, self.size, minibatch_size):
            yield order[start:start + minibatch_size]

    def select(self, index: np.ndarray) -> 'RolloutBatch':
        """Columns `index` of the flat fields (rewards, values and dones are kept whole)."""
        return RolloutBatch(
            observations=self.observations[:, index],
            actions=self.actions[:, index],
            log_probs=self.log_probs[:, index],
            rewards=self.rewards,
            values=self.values,
            dones=self.dones,
            advantages=self.advantages[:, index],
            returns=self.returns[:, index],
        )


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero mean and unit variance over the batch."""
    return (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)


def _flatten(per_step: np.ndarray) -> np.ndarray:
    """(T, d, n) -> (d, T * n) with column t * n + i."""
    horizon, dim, n = per_step.shape
    return per_step.transpose(1, 0, 2).reshape(dim, horizon * n)


def build_batch(trajectory: Trajectory, value_fn: Callable[[np.ndarray], np.ndarray], discount: float,
                lam: float, dones: Optional[np.ndarray] = None) -> RolloutBatch:
    """
    GAE batch from a stochastic rollout.

    Episodes end at the rollout length by truncation, so the final state is
    bootstrapped with its value prediction and done flags stay zero.
    """
    if trajectory.log_probs is None:
        raise ValueError("PPO batches need a stochastic rollout with log-probabilities")
    horizon, n = trajectory.rewards.shape
    observations = _flatten(trajectory.observations)
    all_observations = np.concatenate([observations, trajectory.final_states], axis=1)
    values = value_fn(all_observations).reshape(horizon + 1, n)
    dones = np.zeros((horizon, n)) if dones is None else dones
    advantages, returns = gae(trajectory.rewards, values, dones, discount, lam)
    return RolloutBatch(
        observations=observations,
        actions=_flatten(trajectory.raw_actions),
        log_probs=trajectory.log_probs.reshape(1, horizon * n),
        rewards=trajectory.rewards,
        values=values,
        dones=dones,
        advantages=normalize_advantages(advantages.reshape(1, horizon * n)),
        returns=returns.reshape(1, horizon * n),
    )
