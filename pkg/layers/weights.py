#!/usr/bin/env python3
"""
Constrained Weight Parameterizations

Maps from free parameters to weights with a spectral norm of at most one:
spectral normalization, almost-orthogonal rescaling and Cayley transforms.
All functions run on any `Ops` (eager or recorded) so the derived weights
stay differentiable with respect to the free parameters.
"""

from typing import Any, Optional

import numpy as np

from autodiff.errors import ShapeMismatchError
from autodiff.ops import EAGER, Ops
from autodiff.primitives import PowerIterationCache
from configuration import POWER_ITERATION_MAX_ITERS, POWER_ITERATION_TOL


def make_sn_weight(A: Any, tol: float = POWER_ITERATION_TOL, cache: Optional[PowerIterationCache] = None,
                   ops: Ops = EAGER, max_iters: int = POWER_ITERATION_MAX_ITERS) -> Any:
    """
    Spectrally normalized weight W = A / sigma_max(A).

    Args:
        A: Free weight
        tol: Relative tolerance of the power iteration
        cache: Start-vector cache re-used across calls
        ops: Execution backend
        max_iters: Power iteration cap

    Returns:
        W with unit spectral norm

    Raises:
        DegenerateWeightError: A is all zeros
    """
    rho = ops.spectral_norm(A, cache=cache, tol=tol, max_iters=max_iters, require_nonzero=True)
    return ops.div(A, rho)


def make_aol_weight(A: Any, ops: Ops = EAGER) -> Any:
    """
    Almost-orthogonal weight W = A D with D_ii = (sum_j |A^T A|_ij)^(-1/2).

    Columns whose row sum of |A^T A| is zero get D_ii = 0.
    """
    gram = ops.abs(ops.matmul(ops.transpose(A), A))
    scaling = ops.rsqrt(ops.sum(gram, axis=1))
    return ops.mul(A, ops.transpose(scaling))


def cayley_transform(P: Any, ops: Ops = EAGER) -> Any:
    """Square orthogonal (I - A)(I + A)^-1 of the skew part A = P - P^T."""
    rows, cols = ops.value(P).shape
    if rows != cols:
        raise ShapeMismatchError(f"Cayley transform needs a square matrix, got {(rows, cols)}")
    skew = ops.sub(P, ops.transpose(P))
    identity = ops.eye(rows)
    # (I - A) and (I + A)^-1 commute
    return ops.solve(ops.add(identity, skew), ops.sub(identity, skew))


def make_cayley_weight(P: Any, out_dim: int, in_dim: int, ops: Ops = EAGER) -> Any:
    """
    Cayley weight of shape out_dim x in_dim.

    The square orthogonal matrix of size max(out_dim, in_dim) is sliced to its
    leading rows and columns, so rectangular weights are semi-orthogonal.
    """
    size = max(out_dim, in_dim)
    if ops.value(P).shape != (size, size):
        raise ShapeMismatchError(f"Cayley parameter must be {size}x{size} for a {out_dim}x{in_dim} weight, "
                                 f"got {ops.value(P).shape}")
    square = cayley_transform(P, ops)
    if out_dim == in_dim:
        return square
    return ops.slice(square, rows=(0, out_dim), cols=(0, in_dim))


def make_semi_orthogonal(U: Any, V: Optional[Any], ops: Ops = EAGER) -> Any:
    """
    Row-orthonormal k x n matrix from a free k x k block U and (n-k) x k block V.

    The result is the leading k rows of the Cayley transform of the n x n matrix
    [[U, 0], [V, 0]], so it inherits exact orthonormality of the square transform.
    """
    k = ops.value(U).shape[0]
    if V is None:
        return cayley_transform(U, ops)
    if ops.value(U).shape != (k, k) or ops.value(V).shape[1] != k:
        raise ShapeMismatchError(f"Semi-orthogonal blocks must be k x k and m x k, got "
                                 f"{ops.value(U).shape} and {ops.value(V).shape}")
    n = k + ops.value(V).shape[0]
    padded = ops.concat_cols([ops.concat_rows([U, V]), ops.constant(np.zeros((n, n - k)))])
    return make_cayley_weight(padded, out_dim=k, in_dim=n, ops=ops)
