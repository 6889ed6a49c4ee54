#!/usr/bin/env python3
"""
PPO Package

Proximal Policy Optimization with Gaussian policies around a PolicyNetwork mean.
"""

from .config import PPOConfig
from .gaussian_policy import LOG_STD_KEY, GaussianPolicy, gaussian_entropy, gaussian_log_prob
from .optimizer import Adam, clip_grad_norm, global_norm
from .ppo_loss import LossGraph, ppo_loss, surrogate_terms
from .rollout_buffer import RolloutBatch, build_batch, gae, normalize_advantages
from .trainer import PPOTrainer, TrainingResult, build_value_network, train

__all__ = [
    'Adam',
    'GaussianPolicy',
    'LOG_STD_KEY',
    'LossGraph',
    'PPOConfig',
    'PPOTrainer',
    'RolloutBatch',
    'TrainingResult',
    'build_batch',
    'build_value_network',
    'clip_grad_norm',
    'gae',
    'gaussian_entropy',
    'gaussian_log_prob',
    'global_norm',
    'normalize_advantages',
    'ppo_loss',
    'surrogate_terms',
    'train',
]
