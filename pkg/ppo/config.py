#!/usr/bin/env python3
"""
PPO Configuration

Hyperparameters of the PPO trainer, loaded from and written to JSON.
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

from configuration import (
    INITIAL_LOG_STD,
    PPO_CHECKPOINT_INTERVAL,
    PPO_CLIP_RANGE,
    PPO_DISCOUNT,
    PPO_ENTROPY_COEF,
    PPO_EPOCHS,
    PPO_EVAL_EPISODES,
    PPO_EVAL_INTERVAL,
    PPO_GAE_LAMBDA,
    PPO_MAX_GRAD_NORM,
    PPO_MINIBATCH_SIZE,
    PPO_NUM_ENVS,
    PPO_POLICY_LR,
    PPO_ROLLOUT_LENGTH,
    PPO_TOTAL_STEPS,
    PPO_VALUE_COEF,
    PPO_VALUE_LR,
)


@dataclass
class PPOConfig:
    """
    PPO hyperparameters.

    Attributes:
        num_envs: Parallel environments per rollout batch
        rollout_length: Steps per environment per batch (episodes are truncated here)
        total_steps: Environment steps over the whole run
        discount: Discount factor rho
        gae_lambda: GAE lambda
        clip_range: Surrogate clip epsilon
        epochs: Passes over each batch
        minibatch_size: Transitions per gradient step
        policy_lr: Adam learning rate of the policy (mean network and log-std)
        value_lr: Adam learning rate of the value network
        entropy_coef: Entropy bonus coefficient
        value_coef: Value loss coefficient
        max_grad_norm: Global gradient-norm clip per network
        initial_log_std: Initial state-independent log-std
        eval_episodes: Episodes per deterministic evaluation
        eval_interval: Updates between evaluations
        checkpoint_interval: Updates between checkpoints
        seed: Master seed of initialization, rollouts and minibatch shuffling
    """
    num_envs: int = PPO_NUM_ENVS
    rollout_length: int = PPO_ROLLOUT_LENGTH
    total_steps: int = PPO_TOTAL_STEPS
    discount: float = PPO_DISCOUNT
    gae_lambda: float = PPO_GAE_LAMBDA
    clip_range: float = PPO_CLIP_RANGE
    epochs: int = PPO_EPOCHS
    minibatch_size: int = PPO_MINIBATCH_SIZE
    policy_lr: float = PPO_POLICY_LR
    value_lr: float = PPO_VALUE_LR
    entropy_coef: float = PPO_ENTROPY_COEF
    value_coef: float = PPO_VALUE_COEF
    max_grad_norm: float = PPO_MAX_GRAD_NORM
    initial_log_std: float = INITIAL_LOG_STD
    eval_episodes: int = PPO_EVAL_EPISODES
    eval_interval: int = PPO_EVAL_INTERVAL
    checkpoint_interval: int = PPO_CHECKPOINT_INTERVAL
    seed: int = 0

    def __post_init__(self):
        self._validate_fractions()
        self._validate_counts()

    def _validate_fractions(self) -> None:
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if not 0 < self.gae_lambda <= 1:
            raise ValueError(f"gae_lambda must be in (0, 1], got {self.gae_lambda}")
        if not 0 < self.clip_range < 1:
            raise ValueError(f"clip_range must be in (0, 1), got {self.clip_range}")
        for name in ("policy_lr", "value_lr", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.entropy_coef < 0 or self.value_coef < 0:
            raise ValueError("loss coefficients must be >= 0")

    def _validate_counts(self) -> None:
        for name in ("num_envs", "rollout_length", "total_steps", "epochs", "minibatch_size",
                     "eval_episodes", "eval_interval", "checkpoint_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive count, got {getattr(self, name)}")

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.rollout_length

    @property
    def num_updates(self) -> int:
        return max(1, self.total_steps // self.batch_size)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PPOConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown PPO settings: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
