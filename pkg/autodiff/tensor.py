#!/usr/bin/env python3
"""
Tensor helpers.

A Tensor is a dense, two-dimensional float64 numpy array. Column vectors are
(n, 1), row vectors (1, n) and scalars (1, 1).
"""

from typing import Any, Tuple

import numpy as np
from numpy.typing import NDArray

from autodiff.errors import ShapeMismatchError

Tensor = NDArray[np.float64]
Shape = Tuple[int, int]


def as_tensor(data: Any) -> Tensor:
    """Convert scalars, vectors and matrices to a 2-D float64 array (vectors become columns)."""
    array = np.asarray(data, dtype=np.float64)
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(-1, 1)
    if array.ndim != 2:
        raise ShapeMismatchError(f"Tensors are 2-D, got array with shape {array.shape}")
    return array


def frozen(data: Any) -> Tensor:
    """Return a read-only copy of `data` as a Tensor."""
    array = np.array(as_tensor(data), dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


def broadcast_shape(left: Shape, right: Shape) -> Shape:
    """Shape of an elementwise op; only row/column vector and scalar broadcasting is allowed."""
    rows = _broadcast_dim(left[0], right[0], left, right)
    cols = _broadcast_dim(left[1], right[1], left, right)
    return rows, cols


def _broadcast_dim(a: int, b: int, left: Shape, right: Shape) -> int:
    if a == b:
        return a
    if a == 1:
        return b
    if b == 1:
        return a
    raise ShapeMismatchError(f"Cannot broadcast shapes {left} and {right}")


def unbroadcast(grad: Tensor, shape: Shape) -> Tensor:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad
