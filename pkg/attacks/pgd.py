#!/usr/bin/env python3
"""
Per-step PGD Attack

Maximizes the policy output deviation ||k(x + v) - k(x)|| over an epsilon-ball
of observation perturbations, one independent problem per column.
"""

from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from attacks.attack_spec import Norm
from autodiff.graph import Graph, backward, evaluate
from autodiff.tensor import as_tensor
from configuration import PGD_STEP_FACTOR, PGD_STEPS
from environments.rollout import graph_policy
from logger.log_wrapper import get_logger

logger = get_logger("attacks:pgd", __name__)

# keeps the deviation norm differentiable when k(x + v) = k(x)
NORM_EPS = 1e-30

Seed = Union[int, Sequence[int], None]


def project(v: np.ndarray, epsilon: float, norm: Norm = Norm.L2) -> np.ndarray:
    """Project the columns of v onto the epsilon-ball (radial for l2, componentwise clamp for linf)."""
    if norm is Norm.LINF:
        return np.clip(v, -epsilon, epsilon)
    norms = np.linalg.norm(v, axis=0, keepdims=True)
    return v * np.minimum(1.0, epsilon / np.where(norms > 0, norms, 1.0))


def ascent_direction(g: np.ndarray, norm: Norm = Norm.L2) -> np.ndarray:
    """Sign of the gradient for linf, column-normalized gradient for l2."""
    if norm is Norm.LINF:
        return np.sign(g)
    norms = np.linalg.norm(g, axis=0, keepdims=True)
    return np.where(norms > 0, g / np.where(norms > 0, norms, 1.0), 0.0)


def random_start(shape: Sequence[int], epsilon: float, norm: Norm, rng: np.random.Generator) -> np.ndarray:
    """Points on the boundary of the ball, so that the deviation gradient is informative."""
    if norm is Norm.LINF:
        return epsilon * rng.choice([-1.0, 1.0], size=tuple(shape))
    return epsilon * ascent_direction(rng.standard_normal(tuple(shape)))


@dataclass
class PGDResult:
    """
    Best perturbation per column.

    Attributes:
        perturbation: (obs_dim, n) maximizing perturbations
        deviation: (n,) output deviation at the maximizer
        history: Mean best deviation after each iteration (nondecreasing)
    """
    perturbation: np.ndarray
    deviation: np.ndarray
    history: List[float] = field(default_factory=list, repr=False)


def _deviation_graph(fn, x: np.ndarray, v0: np.ndarray):
    graph = Graph()
    v = graph.input("v", v0)
    x_node = graph.constant(x)
    delta = graph.sub(fn(graph, graph.add(x_node, v)), fn(graph, x_node))
    deviation = graph.output("deviation", graph.sqrt(graph.add(graph.sum(graph.square(delta), axis=0), NORM_EPS)))
    return graph, graph.sum(deviation)


def pgd_step_attack(kappa: Any, x: Any, epsilon: float, norm: Norm = Norm.L2, steps: int = PGD_STEPS,
                    step_size: Optional[float] = None, seed: Seed = 0) -> PGDResult:
    """
    Projected gradient ascent on the output deviation.

    Args:
        kappa: Policy (Gaussian head, PolicyNetwork or (ops, x) function)
        x: (obs_dim, n) observations
        epsilon: Budget
        norm: l2 (normalized-gradient steps) or linf (sign-gradient steps)
        steps: Ascent iterations
        step_size: Absolute step size (2.5 epsilon / steps by default)
        seed: Seed of the random starts

    Returns:
        PGDResult with the best iterate per column
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    norm = Norm.parse(norm)
    x = as_tensor(x)
    if epsilon == 0:
        return PGDResult(perturbation=np.zeros_like(x), deviation=np.zeros(x.shape[1]), history=[0.0])
    step_size = PGD_STEP_FACTOR * epsilon / steps if step_size is None else step_size

    fn = graph_policy(kappa)
    v = random_start(x.shape, epsilon, norm, np.random.default_rng(seed))
    graph, total = _deviation_graph(fn, x, v)
    best = np.full(x.shape[1], -np.inf)
    best_v = v.copy()
    history: List[float] = []

    for iteration in range(steps + 1):
        deviation = evaluate(graph, {"v": v})["deviation"].ravel()
        improved = deviation > best
        best = np.where(improved, deviation, best)
        best_v[:, improved] = v[:, improved]
        history.append(float(best.mean()))
        if iteration == steps:
            break
        grad = backward(graph, total, wrt=["v"])["v"]
        v = project(v + step_size * ascent_direction(grad, norm), epsilon, norm)

    logger.debug(f"PGD ({norm.value}, eps={epsilon:g}) max deviation {best.max():.6g} after {steps} steps")
    return PGDResult(perturbation=best_v, deviation=best, history=history)
