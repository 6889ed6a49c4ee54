#!/usr/bin/env python3
"""
Gradient Checking

Compares reverse-mode gradients of a scalar graph output against central finite
differences of the replayed graph.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional

import numpy as np

from autodiff.errors import ShapeMismatchError
from autodiff.graph import Graph, Node, backward, evaluate
from autodiff.tensor import Tensor, as_tensor
from configuration import GRAD_CHECK_FLOOR, GRAD_CHECK_STEP
from logger.log_wrapper import get_logger

logger = get_logger("autodiff:grad_check", __name__)


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference comparison."""
    passed: bool
    max_relative_error: float
    tolerance: float
    per_parameter: Dict[str, float] = field(default_factory=dict)
    analytic: Dict[str, Tensor] = field(default_factory=dict, repr=False)
    numeric: Dict[str, Tensor] = field(default_factory=dict, repr=False)

    def worst_parameter(self) -> Optional[str]:
        if not self.per_parameter:
            return None
        return max(self.per_parameter, key=self.per_parameter.get)


def relative_error(analytic: Tensor, numeric: Tensor, floor: float = GRAD_CHECK_FLOOR) -> float:
    """Largest absolute difference scaled by the larger gradient magnitude (at least `floor`)."""
    if analytic.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), floor)
    return float(np.max(np.abs(analytic - numeric))) / scale


def grad_check(graph: Graph, output: Node, point: Optional[Dict[str, Any]] = None,
               tolerance: float = 1e-6, step: float = GRAD_CHECK_STEP,
               wrt: Optional[Iterable[str]] = None, floor: float = GRAD_CHECK_FLOOR) -> GradCheckReport:
    """
    Check reverse-mode gradients of a scalar output with central differences.

    Args:
        graph: Recorded graph
        output: Scalar (1x1) output node
        point: Input values to check at (defaults to the recorded values)
        tolerance: Pass threshold on the maximum relative error
        step: Finite-difference step
        wrt: Inputs to check (defaults to all)
        floor: Absolute floor of the error scale, for near-zero gradients

    Returns:
        GradCheckReport with per-parameter relative errors
    """
    if graph.values[output.id].shape != (1, 1):
        raise ShapeMismatchError(f"grad_check needs a scalar output, got {graph.values[output.id].shape}")
    names = list(graph.inputs) if wrt is None else list(wrt)
    base = {name: graph.values[node.id].copy() for name, node in graph.inputs.items()}
    for name, value in (point or {}).items():
        base[name] = as_tensor(value).copy()

    def objective(values: Dict[str, Tensor]) -> float:
        graph.set_inputs(values)
        graph.run_forward()
        return float(graph.values[output.id][0, 0])

    numeric: Dict[str, Tensor] = {}
    for name in names:
        estimate = np.zeros_like(base[name])
        for index in np.ndindex(*base[name].shape):
            shifted = base[name].copy()
            shifted[index] += step
            upper = objective({**base, name: shifted})
            shifted[index] -= 2.0 * step
            lower = objective({**base, name: shifted})
            estimate[index] = (upper - lower) / (2.0 * step)
        numeric[name] = estimate

    evaluate(graph, base)
    analytic = backward(graph, output, wrt=names)

    per_parameter = {name: relative_error(analytic[name], numeric[name], floor) for name in names}
    worst = max(per_parameter.values(), default=0.0)
    report = GradCheckReport(passed=worst < tolerance, max_relative_error=worst, tolerance=tolerance,
                             per_parameter=per_parameter, analytic=analytic, numeric=numeric)
    if not report.passed:
        logger.warning(f"Gradient check failed: max relative error {worst:.3e} at '{report.worst_parameter()}'")
    return report
