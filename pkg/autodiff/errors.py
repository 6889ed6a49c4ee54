#!/usr/bin/env python3
"""
Autodiff Errors

Exception hierarchy shared by the numerical packages. Validation problems are
`ValueError`s; anything that breaks the arithmetic is a `NumericFailure`.
"""

from typing import Optional


class ShapeMismatchError(ValueError):
    """Operand or input shapes are incompatible."""


class DegenerateWeightError(ValueError):
    """A weight matrix cannot be normalized (e.g. it is all zeros)."""


class BackwardBeforeForwardError(RuntimeError):
    """Gradients were requested from a graph without a valid forward pass."""


class NumericFailure(ArithmeticError):
    """Base class for numeric failures (CLI exit code 3)."""


class NonFiniteValueError(NumericFailure):
    """A forward value overflowed or became NaN."""

    def __init__(self, op_name: str, node_id: Optional[int] = None):
        self.op_name = op_name
        self.node_id = node_id
        where = f"node {node_id}" if node_id is not None else "eager op"
        super().__init__(f"Non-finite value produced by '{op_name}' at {where}")


class SingularSystemError(NumericFailure):
    """A linear system is singular or too badly conditioned to solve."""


class RiccatiConvergenceError(NumericFailure):
    """The Riccati fixed-point iteration did not converge."""


class DivergedPolicyError(NumericFailure):
    """PPO produced a non-finite ratio or loss."""
