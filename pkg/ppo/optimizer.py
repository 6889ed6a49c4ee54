#!/usr/bin/env python3
"""
Optimizer

Adam over named parameter dicts and global gradient-norm clipping.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from configuration import ADAM_BETAS, ADAM_EPS

Params = Dict[str, np.ndarray]


def global_norm(grads: Params) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_grad_norm(grads: Params, max_norm: float) -> Tuple[Params, float]:
    """Scale all gradients so their joint l2 norm is at most `max_norm`; returns (grads, norm before clipping)."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0:
        return grads, norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


@dataclass
class Adam:
    """
    Adam with bias correction.

    Attributes:
        lr: Learning rate
        betas: (beta1, beta2)
        eps: Denominator floor
        t: Steps taken
    """
    lr: float
    betas: Tuple[float, float] = ADAM_BETAS
    eps: float = ADAM_EPS
    t: int = 0
    m: Params = field(default_factory=dict, repr=False)
    v: Params = field(default_factory=dict, repr=False)

    def step(self, params: Params, grads: Params) -> Params:
        """Return updated copies of `params`; parameters without a gradient are kept."""
        self.t += 1
        beta1, beta2 = self.betas
        updated = dict(params)
        for name, g in grads.items():
            m = beta1 * self.m.get(name, np.zeros_like(g)) + (1.0 - beta1) * g
            v = beta2 * self.v.get(name, np.zeros_like(g)) + (1.0 - beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - beta1 ** self.t)
            v_hat = v / (1.0 - beta2 ** self.t)
            updated[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated
