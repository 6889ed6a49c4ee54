#!/usr/bin/env python3
"""
Autodiff Package

Tape-based reverse-mode differentiation over dense 2-D float64 tensors.
"""

from .errors import (
    BackwardBeforeForwardError,
    DegenerateWeightError,
    DivergedPolicyError,
    NonFiniteValueError,
    NumericFailure,
    RiccatiConvergenceError,
    ShapeMismatchError,
    SingularSystemError,
)
from .grad_check import GradCheckReport, grad_check
from .graph import Graph, Node, backward, evaluate
from .ops import EAGER, EagerOps, Ops
from .primitives import PowerIterationCache, power_iteration
from .tensor import Tensor, as_tensor

__all__ = [
    'BackwardBeforeForwardError',
    'DegenerateWeightError',
    'DivergedPolicyError',
    'EAGER',
    'EagerOps',
    'GradCheckReport',
    'Graph',
    'Node',
    'NonFiniteValueError',
    'NumericFailure',
    'Ops',
    'PowerIterationCache',
    'RiccatiConvergenceError',
    'ShapeMismatchError',
    'SingularSystemError',
    'Tensor',
    'as_tensor',
    'backward',
    'evaluate',
    'grad_check',
    'power_iteration',
]
