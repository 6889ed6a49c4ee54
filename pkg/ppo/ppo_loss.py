#!/usr/bin/env python3
"""
PPO Loss

Clipped surrogate + value regression - entropy bonus, recorded on a graph so
the policy and value networks can be differentiated in one backward pass.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from autodiff.errors import DivergedPolicyError, NonFiniteValueError
from autodiff.graph import Graph
from autodiff.ops import Ops
from layers.policy_network import PolicyNetwork
from ppo.gaussian_policy import LOG_STD_KEY, GaussianPolicy, gaussian_entropy, gaussian_log_prob
from ppo.rollout_buffer import RolloutBatch

POLICY_PREFIX = "policy/"
VALUE_PREFIX = "value/"


@dataclass
class LossGraph:
    """
    Recorded loss with handles of its components.

    Attributes:
        graph: Tape holding the loss
        total: Scalar loss node
        components: Named scalar nodes (policy, value, entropy, approx_kl, clip_fraction)
        policy_inputs: Graph input names of the policy parameters, keyed by parameter name
        value_inputs: Graph input names of the value parameters, keyed by parameter name
    """
    graph: Graph
    total: Any
    components: Dict[str, Any]
    policy_inputs: Dict[str, str]
    value_inputs: Dict[str, str]

    def values(self) -> Dict[str, float]:
        scalars = {"total": float(self.graph.value(self.total)[0, 0])}
        scalars.update({name: float(self.graph.value(node)[0, 0]) for name, node in self.components.items()})
        return scalars


def surrogate_terms(ops: Ops, ratio: Any, advantages: Any, clip_range: float) -> Any:
    """min(r A, clip(r, 1 - eps, 1 + eps) A) per sample."""
    clipped = ops.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    return ops.minimum(ops.mul(ratio, advantages), ops.mul(clipped, advantages))


def ppo_loss(policy: GaussianPolicy, value_network: PolicyNetwork, batch: RolloutBatch, clip_range: float,
             value_coef: float, entropy_coef: float, graph: Optional[Graph] = None) -> LossGraph:
    """
    L = -E[min(r A, clip(r, 1 +- eps) A)] + c_v E[(V - returns)^2] - c_e E[entropy].

    Args:
        policy: Current Gaussian policy (its parameters become graph inputs)
        value_network: Current value network
        batch: Minibatch with normalized advantages
        clip_range: Surrogate clip epsilon (math.inf disables clipping)
        value_coef: Value loss coefficient
        entropy_coef: Entropy coefficient
        graph: Optional graph to record into

    Raises:
        DivergedPolicyError: Non-finite ratio or loss
    """
    graph = graph or Graph()
    policy_handles = policy.network.bind(graph, prefix=POLICY_PREFIX)
    log_std = graph.input(POLICY_PREFIX + LOG_STD_KEY, policy.log_std)
    value_handles = value_network.bind(graph, prefix=VALUE_PREFIX)

    try:
        observations = graph.constant(batch.observations)
        mean = policy.network.forward(graph, observations, policy_handles)
        log_prob = gaussian_log_prob(graph, mean, batch.actions, log_std)
        log_ratio = graph.sub(log_prob, batch.log_probs)
        ratio = graph.exp(log_ratio)
        policy_loss = graph.neg(graph.mean(surrogate_terms(graph, ratio, batch.advantages, clip_range)))

        predicted = value_network.forward(graph, observations, value_handles)
        value_loss = graph.mean(graph.square(graph.sub(predicted, batch.returns)))
        entropy = gaussian_entropy(graph, log_std)

        total = graph.add(graph.add(policy_loss, graph.scale(value_loss, value_coef)),
                          graph.scale(entropy, -entropy_coef))
    except NonFiniteValueError as e:
        raise DivergedPolicyError(f"PPO loss became non-finite: {e}") from e

    ratio_value = graph.value(ratio)
    components = {
        "policy": policy_loss,
        "value": value_loss,
        "entropy": entropy,
        "approx_kl": graph.constant(np.array([[float(np.mean(-graph.value(log_ratio)))]])),
        "clip_fraction": graph.constant(np.array([[float(np.mean(np.abs(ratio_value - 1.0) > clip_range))]])),
    }
    names = {name: POLICY_PREFIX + name for name in policy_handles}
    names[LOG_STD_KEY] = POLICY_PREFIX + LOG_STD_KEY
    return LossGraph(graph=graph, total=total, components=components, policy_inputs=names,
                     value_inputs={name: VALUE_PREFIX + name for name in value_handles})
