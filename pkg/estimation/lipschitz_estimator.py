#!/usr/bin/env python3
"""
Lipschitz Estimator

Empirical lower bounds max ||k(x + v) - k(x)|| / ||v|| over a domain box and an
epsilon-ball of perturbations, found by projected gradient ascent. Restarts
and grid cells are evaluated as columns of one recorded graph.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autodiff.graph import Graph, backward, evaluate
from autodiff.ops import Ops
from configuration import (
    ESTIMATION_CHUNK_COLUMNS,
    ESTIMATION_EPSILON,
    ESTIMATION_ITERS,
    ESTIMATION_MIN_PERTURBATION,
    ESTIMATION_RESTARTS,
    ESTIMATION_STEP,
    LOCAL_GRID_RESOLUTION,
    LOCAL_GRID_RESTARTS,
    PENDULUM_DOMAIN,
)
from layers.policy_network import PolicyNetwork, certified_upper_bound
from logger.log_wrapper import get_logger

logger = get_logger("estimation:lipschitz", __name__)

PolicyFunction = Callable[[Ops, Any], Any]
Box = Sequence[Tuple[float, float]]

# keeps the output norm differentiable when k(x + v) = k(x)
NORM_EPS = 1e-30
# largest output change ||k(x + v) - k(x)|| still read as no change
CONSTANT_TOL = 1e-12


@dataclass
class EstimationSettings:
    """Settings of the empirical lower-bound search."""
    epsilon: float = ESTIMATION_EPSILON
    restarts: int = ESTIMATION_RESTARTS
    iters: int = ESTIMATION_ITERS
    step: float = ESTIMATION_STEP
    grid_resolution: int = LOCAL_GRID_RESOLUTION
    grid_restarts: int = LOCAL_GRID_RESTARTS
    domain: Tuple[Tuple[float, float], ...] = PENDULUM_DOMAIN

    def __post_init__(self) -> None:
        self.domain = tuple((float(low), float(high)) for low, high in self.domain)
        self._validate_settings()

    def _validate_settings(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.restarts < 1 or self.grid_restarts < 1:
            raise ValueError("restart counts must be >= 1")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.grid_resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        _validate_box(self.domain)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EstimationSettings':
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["domain"] = [list(bounds) for bounds in self.domain]
        return data


@dataclass
class LipEstimate:
    """
    Result of an empirical lower-bound search.

    Attributes:
        lower_bound: Best ratio found (0 for a constant map)
        x: Maximizing point
        v: Maximizing perturbation
        restarts: Restarts used
        iterations: Ascent iterations per restart
        tightness: lower_bound / certified bound when the certified bound is known
        constant: True when the map showed no variation
        history: Best ratio so far after each iteration
    """
    lower_bound: float
    x: np.ndarray
    v: np.ndarray
    restarts: int
    iterations: int
    tightness: Optional[float] = None
    certified_bound: Optional[float] = None
    constant: bool = False
    history: List[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower_bound": self.lower_bound,
            "x": self.x.tolist(),
            "v": self.v.tolist(),
            "restarts": self.restarts,
            "iterations": self.iterations,
            "tightness": self.tightness,
            "certified_bound": self.certified_bound,
            "constant": self.constant,
        }


@dataclass
class LocalLipschitzGrid:
    """Local lower bounds over a phase-space grid (rows: alpha, columns: alpha_dot)."""
    alpha: np.ndarray
    alpha_dot: np.ndarray
    values: np.ndarray
    epsilon: float
    restarts: int

    def save(self, csv_path: str) -> str:
        """Write the grid as CSV with a JSON sidecar holding the axes."""
        os.makedirs(os.path.dirname(csv_path) or ".", exist_ok=True)
        frame = pd.DataFrame(self.values, columns=[f"alpha_dot_{j}" for j in range(self.values.shape[1])])
        frame.to_csv(csv_path, index=False)
        sidecar = os.path.splitext(csv_path)[0] + ".json"
        with open(sidecar, 'w') as f:
            json.dump({"rows": "alpha", "cols": "alpha_dot", "alpha": self.alpha.tolist(),
                       "alpha_dot": self.alpha_dot.tolist(), "epsilon": self.epsilon,
                       "restarts": self.restarts}, f, indent=2)
        return csv_path


def policy_function(kappa: Any) -> PolicyFunction:
    """Adapt a PolicyNetwork (or an (ops, x) function) to an (ops, x) function with frozen parameters."""
    if isinstance(kappa, PolicyNetwork):
        return lambda ops, x: kappa.forward(ops, x)
    if callable(kappa):
        return kappa
    raise TypeError(f"Cannot evaluate {type(kappa).__name__} as a policy")


def _validate_box(box: Box) -> None:
    if not box:
        raise ValueError("domain box is empty")
    for low, high in box:
        if not high > low:
            raise ValueError(f"domain box is degenerate: [{low}, {high}]")


def _column_norms(a: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a, axis=0, keepdims=True)


def _normalized(g: np.ndarray) -> np.ndarray:
    norms = _column_norms(g)
    return np.where(norms > 0, g / np.where(norms > 0, norms, 1.0), 0.0)


def project_ball(v: np.ndarray, epsilon: float, floor: float = ESTIMATION_MIN_PERTURBATION) -> np.ndarray:
    """Project columns onto the l2 ball of radius epsilon, keeping norms >= floor."""
    norms = _column_norms(v)
    safe = np.where(norms > 0, norms, 1.0)
    v = v * np.minimum(1.0, epsilon / safe)
    norms = _column_norms(v)
    small = norms < floor
    if np.any(small):
        direction = np.where(norms > 0, v / np.where(norms > 0, norms, 1.0), 0.0)
        direction[0, (norms == 0).ravel()] = 1.0
        v = np.where(small, direction * floor, v)
    return v


def _ratio_graph(fn: PolicyFunction, x0: np.ndarray, v0: np.ndarray) -> Tuple[Graph, Any, Any]:
    graph = Graph()
    x = graph.input("x", x0)
    v = graph.input("v", v0)
    delta = graph.sub(fn(graph, graph.add(x, v)), fn(graph, x))
    spread = graph.output("spread", graph.sum(graph.square(delta), axis=0))
    numerator = graph.sqrt(graph.add(spread, NORM_EPS))
    denominator = graph.sqrt(graph.sum(graph.square(v), axis=0))
    ratio = graph.output("ratio", graph.div(numerator, denominator))
    return graph, ratio, graph.sum(ratio)


def _ascend(fn: PolicyFunction, x0: np.ndarray, v0: np.ndarray, epsilon: float, iters: int, step: float,
            box: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, List[float], np.ndarray]:
    """
    Projected normalized-gradient ascent on the ratio, one problem per column.

    `box` is a (dims, 2) array of bounds; None keeps x fixed.
    Returns best ratios, the maximizing x and v, the best-so-far history and
    the largest output change ||k(x + v) - k(x)|| seen per column.
    """
    x, v = x0.copy(), project_ball(v0, epsilon)
    graph, ratio_node, total = _ratio_graph(fn, x, v)
    half_width = None if box is None else 0.5 * (box[:, 1:2] - box[:, 0:1])
    best = np.full(x.shape[1], -np.inf)
    best_x, best_v = x.copy(), v.copy()
    moved = np.zeros(x.shape[1])
    history: List[float] = []

    for iteration in range(iters + 1):
        values = evaluate(graph, {"x": x, "v": v})
        ratio = values["ratio"].ravel()
        moved = np.maximum(moved, np.sqrt(values["spread"].ravel()))
        improved = ratio > best
        best = np.where(improved, ratio, best)
        best_x[:, improved] = x[:, improved]
        best_v[:, improved] = v[:, improved]
        history.append(float(best.max()))
        if iteration == iters:
            break
        grads = backward(graph, total, wrt=["x", "v"] if box is not None else ["v"])
        size = step if iteration < iters // 2 else step / 10.0
        v = project_ball(v + size * epsilon * _normalized(grads["v"]), epsilon)
        if box is not None:
            x = np.clip(x + size * half_width * _normalized(grads["x"]), box[:, 0:1], box[:, 1:2])

    return best, best_x, best_v, history, moved


def empirical_lower_bound(kappa: Any, domain: Box = PENDULUM_DOMAIN, epsilon: float = ESTIMATION_EPSILON,
                          restarts: int = ESTIMATION_RESTARTS, iters: int = ESTIMATION_ITERS,
                          step: float = ESTIMATION_STEP, seed: int = 0) -> LipEstimate:
    """
    Empirical Lipschitz lower bound by projected gradient ascent over (x, v).

    Args:
        kappa: PolicyNetwork or (ops, x) function of column batches
        domain: Box of (low, high) bounds per input dimension
        epsilon: Radius of the perturbation ball
        restarts: Independent random starts
        iters: Ascent iterations per restart (step decays 10x at iters/2)
        step: Relative step size
        seed: Seed of the random starts

    Returns:
        LipEstimate with the best ratio over all restarts
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _validate_box(domain)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    fn = policy_function(kappa)
    box = np.asarray(domain, dtype=np.float64)
    rng = np.random.default_rng(seed)
    dims = box.shape[0]
    x0 = rng.uniform(box[:, 0:1], box[:, 1:2], size=(dims, restarts))
    direction = _normalized(rng.standard_normal((dims, restarts)))
    v0 = epsilon * direction

    best, best_x, best_v, history, moved = _ascend(fn, x0, v0, epsilon, iters, step, box)
    winner = int(np.argmax(best))
    lower_bound = float(best[winner])
    # the ratio of a constant map bottoms out at sqrt(NORM_EPS) over the perturbation floor, not at 0
    constant = bool(moved.max() <= CONSTANT_TOL)
    if constant:
        logger.warning("Policy is constant on the domain; empirical lower bound is 0")
        lower_bound = 0.0
        history = [0.0 for _ in history]

    certified = certified_upper_bound(kappa) if isinstance(kappa, PolicyNetwork) else None
    tightness = lower_bound / certified if certified else None
    logger.debug(f"Empirical lower bound {lower_bound:.6g} over {restarts} restarts x {iters} iterations")
    return LipEstimate(lower_bound=lower_bound, x=best_x[:, winner].copy(), v=best_v[:, winner].copy(),
                       restarts=restarts, iterations=iters, tightness=tightness, certified_bound=certified,
                       constant=constant, history=history)


def local_lipschitz_grid(kappa: Any, domain: Box = PENDULUM_DOMAIN, resolution: Any = LOCAL_GRID_RESOLUTION,
                         epsilon: float = ESTIMATION_EPSILON, restarts: int = LOCAL_GRID_RESTARTS,
                         iters: int = ESTIMATION_ITERS, step: float = ESTIMATION_STEP, seed: int = 0,
                         chunk_columns: int = ESTIMATION_CHUNK_COLUMNS) -> LocalLipschitzGrid:
    """
    Local lower bounds on a regular (alpha, alpha_dot) grid, x fixed at each cell center.

    Args:
        kappa: PolicyNetwork or (ops, x) function of 2-row column batches
        domain: ((alpha_low, alpha_high), (alpha_dot_low, alpha_dot_high))
        resolution: Points per axis (int) or (alpha_points, alpha_dot_points)
        epsilon: Perturbation radius
        restarts: Restarts per cell
        iters: Ascent iterations
        step: Relative step size
        seed: Seed of the random perturbation starts
        chunk_columns: Maximum columns per recorded graph

    Returns:
        LocalLipschitzGrid with values[i, j] at (alpha[i], alpha_dot[j])
    """
    rows, cols = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if rows < 2 or cols < 2:
        raise ValueError(f"grid resolution must be at least 2x2, got {rows}x{cols}")
    _validate_box(domain)
    fn = policy_function(kappa)
    alpha = np.linspace(domain[0][0], domain[0][1], rows)
    alpha_dot = np.linspace(domain[1][0], domain[1][1], cols)
    centers = np.stack(np.meshgrid(alpha, alpha_dot, indexing="ij"), axis=0).reshape(2, -1)
    x_all = np.repeat(centers, restarts, axis=1)
    rng = np.random.default_rng(seed)
    v_all = epsilon * _normalized(rng.standard_normal(x_all.shape))

    ratios = np.empty(x_all.shape[1])
    for start in range(0, x_all.shape[1], chunk_columns):
        stop = min(start + chunk_columns, x_all.shape[1])
        best, _, _, _, moved = _ascend(fn, x_all[:, start:stop], v_all[:, start:stop], epsilon, iters, step, None)
        ratios[start:stop] = np.where(moved <= CONSTANT_TOL, 0.0, best)
        logger.debug(f"Local Lipschitz grid columns {start}-{stop} of {x_all.shape[1]} done")

    values = ratios.reshape(rows * cols, restarts).max(axis=1).reshape(rows, cols)
    return LocalLipschitzGrid(alpha=alpha, alpha_dot=alpha_dot, values=values, epsilon=epsilon, restarts=restarts)
