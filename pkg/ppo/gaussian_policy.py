#!/usr/bin/env python3
"""
Gaussian Policy Head

u ~ N(k(x; theta), diag(exp(log_std))^2) with a state-independent log-std.
Lipschitz certification applies to the mean network k only.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Sequence, Tuple

import numpy as np

from autodiff.ops import EAGER, Ops
from autodiff.tensor import Tensor, as_tensor
from configuration import INITIAL_LOG_STD
from layers.policy_network import PolicyNetwork

LOG_STD_KEY = "log_std"
HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def gaussian_log_prob(ops: Ops, mean: Any, actions: Any, log_std: Any) -> Any:
    """sum_a -1/2 ((u - mu) / sigma)^2 - log sigma - 1/2 log 2 pi, shape (1, n)."""
    z = ops.mul(ops.sub(actions, mean), ops.exp(ops.neg(log_std)))
    per_dim = ops.sub(ops.scale(ops.square(z), -0.5), ops.add(log_std, HALF_LOG_TWO_PI))
    return ops.sum(per_dim, axis=0)


def gaussian_entropy(ops: Ops, log_std: Any) -> Any:
    """Entropy sum_a (log sigma + 1/2 log(2 pi e)), shape (1, 1)."""
    return ops.sum(ops.add(log_std, HALF_LOG_TWO_PI + 0.5))


@dataclass(frozen=True)
class GaussianPolicy:
    """
    Stochastic policy around a PolicyNetwork mean.

    Attributes:
        network: Mean network k
        log_std: (action_dim, 1) free log standard deviations
    """
    network: PolicyNetwork
    log_std: Tensor
    _mean: Callable[[Any], Tensor] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "log_std", as_tensor(self.log_std))
        if self.log_std.shape != (self.network.output_dim, 1):
            raise ValueError(f"log_std must be ({self.network.output_dim}, 1), got {self.log_std.shape}")
        object.__setattr__(self, "_mean", self.network.compiled())

    @classmethod
    def create(cls, network: PolicyNetwork, initial_log_std: float = INITIAL_LOG_STD) -> 'GaussianPolicy':
        return cls(network, np.full((network.output_dim, 1), float(initial_log_std)))

    @property
    def std(self) -> Tensor:
        return np.exp(self.log_std)

    def mean_action(self, observation: Any) -> Tensor:
        return self._mean(observation)

    def sample_action(self, observation: Any, rngs: Sequence[np.random.Generator]) -> Tuple[Tensor, Tensor]:
        """Sample one action per column from that column's stream; returns (actions, log-probs)."""
        mean = self.mean_action(observation)
        noise = np.array([rng.standard_normal(mean.shape[0]) for rng in rngs], dtype=np.float64).T
        actions = mean + self.std * noise.reshape(mean.shape)
        return actions, gaussian_log_prob(EAGER, mean, actions, self.log_std)

    def log_prob(self, observation: Any, actions: Any) -> Tensor:
        return gaussian_log_prob(EAGER, self.mean_action(observation), as_tensor(actions), self.log_std)

    def entropy(self) -> float:
        return float(gaussian_entropy(EAGER, self.log_std)[0, 0])

    def parameters(self) -> Dict[str, Tensor]:
        params = dict(self.network.parameters())
        params[LOG_STD_KEY] = self.log_std
        return params

    def with_parameters(self, params: Dict[str, Tensor]) -> 'GaussianPolicy':
        network_params = dict(self.network.parameters())
        network_params.update({name: value for name, value in params.items() if name != LOG_STD_KEY})
        return replace(self, network=self.network.with_parameters(network_params),
                       log_std=params.get(LOG_STD_KEY, self.log_std))
