#!/usr/bin/env python3
"""
Primitive Operations

Function library for the tape: every primitive pairs a forward rule with its
vector-Jacobian product. Forward rules return `(value, aux)`; `aux` carries
whatever the backward rule needs (LU factors, singular vectors).
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from autodiff.errors import DegenerateWeightError, ShapeMismatchError, SingularSystemError
from autodiff.tensor import Tensor, broadcast_shape, unbroadcast
from configuration import POWER_ITERATION_MAX_ITERS, POWER_ITERATION_TOL, SOLVE_CONDITION_LIMIT
from logger.log_wrapper import get_logger

logger = get_logger("autodiff:primitives", __name__)

Forward = Callable[..., Tuple[Tensor, Any]]
VJP = Callable[..., Tuple[Optional[Tensor], ...]]


@dataclass(frozen=True)
class Primitive:
    """A differentiable primitive: forward rule plus vector-Jacobian product."""
    name: str
    forward: Forward
    vjp: VJP


@dataclass
class PowerIterationCache:
    """Right singular vector kept between power iterations of the same weight."""
    vector: Optional[np.ndarray] = None
    iterations: int = 0


PRIMITIVES: Dict[str, Primitive] = {}


def _register(name: str, forward: Forward, vjp: VJP) -> None:
    PRIMITIVES[name] = Primitive(name=name, forward=forward, vjp=vjp)


def get_primitive(name: str) -> Primitive:
    """Look up a primitive by name."""
    try:
        return PRIMITIVES[name]
    except KeyError:
        raise ValueError(f"Unknown primitive: {name}") from None


# --- linear algebra ---------------------------------------------------------

def _matmul_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: {a.shape} x {b.shape}")
    return a @ b, None


def _matmul_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    return g @ b.T, a.T @ g


def _transpose_forward(a: Tensor) -> Tuple[Tensor, Any]:
    return a.T.copy(), None


def _transpose_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor):
    return (g.T,)


def _check_square(name: str, a: Tensor) -> None:
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatchError(f"{name}: matrix must be square, got {a.shape}")


def _lu_factor(name: str, a: Tensor):
    _check_square(name, a)
    condition = np.linalg.cond(a)
    if not np.isfinite(condition) or condition > SOLVE_CONDITION_LIMIT:
        raise SingularSystemError(f"{name}: condition number {condition:.3e} exceeds {SOLVE_CONDITION_LIMIT:.0e}")
    return scipy.linalg.lu_factor(a, check_finite=False)


def _solve_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(f"solve: {a.shape} with right-hand side {b.shape}")
    lu = _lu_factor("solve", a)
    x = scipy.linalg.lu_solve(lu, b, check_finite=False)
    return x, lu


def _solve_vjp(g: Tensor, out: Tensor, lu: Any, a: Tensor, b: Tensor):
    # adjoint system A^T lambda = g shares the forward LU factors
    grad_b = scipy.linalg.lu_solve(lu, g, trans=1, check_finite=False)
    return -grad_b @ out.T, grad_b


def _inverse_forward(a: Tensor) -> Tuple[Tensor, Any]:
    lu = _lu_factor("inverse", a)
    return scipy.linalg.lu_solve(lu, np.eye(a.shape[0]), check_finite=False), lu


def _inverse_vjp(g: Tensor, out: Tensor, lu: Any, a: Tensor):
    # d(X^-1) = -X^-1 dX X^-1
    return (-out.T @ g @ out.T,)


# --- elementwise -----------------------------------------------------------

def _add_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    return a + b, None


def _add_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    return unbroadcast(g, a.shape), unbroadcast(g, b.shape)


def _sub_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    return a - b, None


def _sub_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)


def _mul_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    return a * b, None


def _mul_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)


def _div_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        return a / b, None


def _div_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    return unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)


def _minimum_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    return np.minimum(a, b), None


def _minimum_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    pick_a = (a <= b).astype(np.float64)
    return unbroadcast(g * pick_a, a.shape), unbroadcast(g * (1.0 - pick_a), b.shape)


def _maximum_forward(a: Tensor, b: Tensor) -> Tuple[Tensor, Any]:
    broadcast_shape(a.shape, b.shape)
    return np.maximum(a, b), None


def _maximum_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, b: Tensor):
    pick_a = (a >= b).astype(np.float64)
    return unbroadcast(g * pick_a, a.shape), unbroadcast(g * (1.0 - pick_a), b.shape)


def _scale_forward(a: Tensor, factor: float) -> Tuple[Tensor, Any]:
    return a * factor, None


def _scale_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, factor: float):
    return (g * factor,)


def _clip_forward(a: Tensor, low: float, high: float) -> Tuple[Tensor, Any]:
    return np.clip(a, low, high), None


def _clip_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, low: float, high: float):
    inside = ((a >= low) & (a <= high)).astype(np.float64)
    return (g * inside,)


def _wrap_angle_forward(a: Tensor) -> Tuple[Tensor, Any]:
    return np.mod(a + math.pi, 2.0 * math.pi) - math.pi, None


def _unary(name: str, forward: Callable[[Tensor], Tensor], derivative: Callable[[Tensor, Tensor], Tensor]) -> None:
    def _forward(a: Tensor) -> Tuple[Tensor, Any]:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return forward(a), None

    def _vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g * derivative(a, out),)

    _register(name, _forward, _vjp)


def _rsqrt(a: Tensor) -> Tensor:
    positive = a > 0
    return np.where(positive, 1.0 / np.sqrt(np.where(positive, a, 1.0)), 0.0)


def _rsqrt_derivative(a: Tensor, out: Tensor) -> Tensor:
    return np.where(a > 0, -0.5 * out ** 3, 0.0)


# --- reductions and structure ------------------------------------------------

def _sum_forward(a: Tensor, axis: Optional[int] = None) -> Tuple[Tensor, Any]:
    if axis is None:
        return np.array([[a.sum()]]), None
    return a.sum(axis=axis, keepdims=True), None


def _sum_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, axis: Optional[int] = None):
    return (np.broadcast_to(g, a.shape).copy(),)


def _mean_forward(a: Tensor, axis: Optional[int] = None) -> Tuple[Tensor, Any]:
    if axis is None:
        return np.array([[a.mean()]]), None
    return a.mean(axis=axis, keepdims=True), None


def _mean_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, axis: Optional[int] = None):
    count = a.size if axis is None else a.shape[axis]
    return (np.broadcast_to(g / count, a.shape).copy(),)


def _concat_forward(*parts: Tensor, axis: int) -> Tuple[Tensor, Any]:
    other = 1 - axis
    if len({part.shape[other] for part in parts}) != 1:
        raise ShapeMismatchError(f"concat(axis={axis}): {[part.shape for part in parts]}")
    return np.concatenate(parts, axis=axis), None


def _concat_vjp(g: Tensor, out: Tensor, aux: Any, *parts: Tensor, axis: int):
    edges = np.cumsum([part.shape[axis] for part in parts])[:-1]
    return tuple(np.split(g, edges, axis=axis))


def _slice_forward(a: Tensor, rows: Tuple[int, int], cols: Tuple[int, int]) -> Tuple[Tensor, Any]:
    if not (0 <= rows[0] < rows[1] <= a.shape[0] and 0 <= cols[0] < cols[1] <= a.shape[1]):
        raise ShapeMismatchError(f"slice rows={rows} cols={cols} out of range for {a.shape}")
    return a[rows[0]:rows[1], cols[0]:cols[1]].copy(), None


def _slice_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, rows: Tuple[int, int], cols: Tuple[int, int]):
    grad = np.zeros_like(a)
    grad[rows[0]:rows[1], cols[0]:cols[1]] = g
    return (grad,)


def _diag_forward(v: Tensor) -> Tuple[Tensor, Any]:
    if 1 not in v.shape:
        raise ShapeMismatchError(f"diag expects a vector, got {v.shape}")
    return np.diag(v.ravel()), None


def _diag_vjp(g: Tensor, out: Tensor, aux: Any, v: Tensor):
    return (np.diag(g).reshape(v.shape).copy(),)


# --- spectral norm -----------------------------------------------------------

def power_iteration(matrix: Tensor, cache: Optional[PowerIterationCache] = None,
                    tol: float = POWER_ITERATION_TOL,
                    max_iters: int = POWER_ITERATION_MAX_ITERS) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Largest singular value of `matrix` with its singular vectors.

    Args:
        matrix: Matrix to analyse
        cache: Optional holder of the start vector, updated in place
        tol: Relative tolerance on sigma and on the right singular vector
        max_iters: Iteration cap

    Returns:
        (sigma, u, v) with matrix @ v = sigma * u
    """
    cols = matrix.shape[1]
    if cache is not None and cache.vector is not None and cache.vector.shape == (cols,):
        v = cache.vector.copy()
    else:
        v = np.random.default_rng(0).standard_normal(cols)
        v /= np.linalg.norm(v)

    if not np.any(matrix):
        return 0.0, np.zeros(matrix.shape[0]), v

    sigma = 0.0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        u = matrix @ v
        u_norm = np.linalg.norm(u)
        if u_norm == 0.0:
            # start vector in the null space; restart from a fresh direction
            v = np.random.default_rng(iterations).standard_normal(cols)
            v /= np.linalg.norm(v)
            continue
        u /= u_norm
        w = matrix.T @ u
        new_sigma = float(np.linalg.norm(w))
        new_v = w / new_sigma
        converged = (abs(new_sigma - sigma) <= tol * new_sigma and
                     np.linalg.norm(new_v - v) <= tol)
        sigma, v = new_sigma, new_v
        if converged:
            break
    else:
        logger.debug(f"Power iteration hit {max_iters} iterations (sigma={sigma:.12g})")

    u = matrix @ v
    sigma = float(np.linalg.norm(u))
    u = u / sigma
    if cache is not None:
        cache.vector = v.copy()
        cache.iterations = iterations
    return sigma, u, v


def _spectral_norm_forward(a: Tensor, cache: Optional[PowerIterationCache] = None,
                           tol: float = POWER_ITERATION_TOL,
                           max_iters: int = POWER_ITERATION_MAX_ITERS,
                           require_nonzero: bool = False) -> Tuple[Tensor, Any]:
    if require_nonzero and not np.any(a):
        raise DegenerateWeightError("spectral normalization of an all-zero weight")
    sigma, u, v = power_iteration(a, cache, tol, max_iters)
    return np.array([[sigma]]), (u, v)


def _spectral_norm_vjp(g: Tensor, out: Tensor, aux: Any, a: Tensor, **attrs: Any):
    u, v = aux
    return (g[0, 0] * np.outer(u, v),)


_register("matmul", _matmul_forward, _matmul_vjp)
_register("transpose", _transpose_forward, _transpose_vjp)
_register("solve", _solve_forward, _solve_vjp)
_register("inverse", _inverse_forward, _inverse_vjp)
_register("add", _add_forward, _add_vjp)
_register("sub", _sub_forward, _sub_vjp)
_register("mul", _mul_forward, _mul_vjp)
_register("div", _div_forward, _div_vjp)
_register("minimum", _minimum_forward, _minimum_vjp)
_register("maximum", _maximum_forward, _maximum_vjp)
_register("scale", _scale_forward, _scale_vjp)
_register("clip", _clip_forward, _clip_vjp)
_register("wrap_angle", _wrap_angle_forward, lambda g, out, aux, a: (g,))
_register("sum", _sum_forward, _sum_vjp)
_register("mean", _mean_forward, _mean_vjp)
_register("concat", _concat_forward, _concat_vjp)
_register("slice", _slice_forward, _slice_vjp)
_register("diag", _diag_forward, _diag_vjp)
_register("spectral_norm", _spectral_norm_forward, _spectral_norm_vjp)

_unary("tanh", np.tanh, lambda a, out: 1.0 - out * out)
_unary("relu", lambda a: np.maximum(a, 0.0), lambda a, out: (a > 0).astype(np.float64))
_unary("sigmoid", lambda a: 0.5 * (1.0 + np.tanh(0.5 * a)), lambda a, out: out * (1.0 - out))
_unary("exp", np.exp, lambda a, out: out)
_unary("log", np.log, lambda a, out: 1.0 / a)
_unary("abs", np.abs, lambda a, out: np.sign(a))
_unary("square", np.square, lambda a, out: 2.0 * a)
_unary("sqrt", np.sqrt, lambda a, out: 0.5 / out)
_unary("rsqrt", _rsqrt, _rsqrt_derivative)
_unary("sin", np.sin, lambda a, out: np.cos(a))
_unary("cos", np.cos, lambda a, out: -np.sin(a))

ACTIVATIONS: Sequence[str] = ("tanh", "relu", "sigmoid")
