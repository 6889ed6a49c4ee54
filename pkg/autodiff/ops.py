#!/usr/bin/env python3
"""
Ops Interface

Models (layers, networks, dynamics, losses) are written once against `Ops` and
run either eagerly on numpy arrays (`EagerOps`) or recorded on a tape (`Graph`)
for reverse-mode differentiation.
"""

from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from autodiff.errors import NonFiniteValueError
from autodiff.primitives import ACTIVATIONS, PowerIterationCache, get_primitive
from autodiff.tensor import Tensor, as_tensor
from configuration import POWER_ITERATION_MAX_ITERS, POWER_ITERATION_TOL


class Ops:
    """Primitive vocabulary shared by eager execution and graph recording."""

    # --- subclass hooks ---------------------------------------------------

    def _apply(self, name: str, *inputs: Any, **attrs: Any) -> Any:
        raise NotImplementedError

    def constant(self, value: Any) -> Any:
        """Wrap a fixed value (no gradient flows into it)."""
        raise NotImplementedError

    def parameter(self, name: str, value: Any) -> Any:
        """Wrap a named differentiable leaf."""
        raise NotImplementedError

    def value(self, handle: Any) -> Tensor:
        """Current numeric value behind a handle."""
        raise NotImplementedError

    def bind(self, params: Dict[str, Tensor], trainable: bool = True) -> Dict[str, Any]:
        """Wrap a dict of named tensors as parameters (or constants when not trainable)."""
        if trainable:
            return {name: self.parameter(name, value) for name, value in params.items()}
        return {name: self.constant(value) for name, value in params.items()}

    # --- linear algebra ---------------------------------------------------

    def matmul(self, a: Any, b: Any) -> Any:
        return self._apply("matmul", a, b)

    def transpose(self, a: Any) -> Any:
        return self._apply("transpose", a)

    def solve(self, a: Any, b: Any) -> Any:
        """X with A X = B (LU with partial pivoting)."""
        return self._apply("solve", a, b)

    def inverse(self, a: Any) -> Any:
        return self._apply("inverse", a)

    def spectral_norm(self, a: Any, cache: Optional[PowerIterationCache] = None,
                      tol: float = POWER_ITERATION_TOL, max_iters: int = POWER_ITERATION_MAX_ITERS,
                      require_nonzero: bool = False) -> Any:
        return self._apply("spectral_norm", a, cache=cache, tol=tol, max_iters=max_iters,
                           require_nonzero=require_nonzero)

    # --- elementwise ------------------------------------------------------

    def add(self, a: Any, b: Any) -> Any:
        return self._apply("add", a, b)

    def sub(self, a: Any, b: Any) -> Any:
        return self._apply("sub", a, b)

    def mul(self, a: Any, b: Any) -> Any:
        return self._apply("mul", a, b)

    def div(self, a: Any, b: Any) -> Any:
        return self._apply("div", a, b)

    def scale(self, a: Any, factor: float) -> Any:
        return self._apply("scale", a, factor=float(factor))

    def neg(self, a: Any) -> Any:
        return self.scale(a, -1.0)

    def minimum(self, a: Any, b: Any) -> Any:
        return self._apply("minimum", a, b)

    def maximum(self, a: Any, b: Any) -> Any:
        return self._apply("maximum", a, b)

    def clip(self, a: Any, low: float, high: float) -> Any:
        return self._apply("clip", a, low=float(low), high=float(high))

    def wrap_angle(self, a: Any) -> Any:
        """Map angles to [-pi, pi); the gradient is the identity."""
        return self._apply("wrap_angle", a)

    def tanh(self, a: Any) -> Any:
        return self._apply("tanh", a)

    def relu(self, a: Any) -> Any:
        return self._apply("relu", a)

    def sigmoid(self, a: Any) -> Any:
        return self._apply("sigmoid", a)

    def exp(self, a: Any) -> Any:
        return self._apply("exp", a)

    def log(self, a: Any) -> Any:
        return self._apply("log", a)

    def abs(self, a: Any) -> Any:
        return self._apply("abs", a)

    def square(self, a: Any) -> Any:
        return self._apply("square", a)

    def sqrt(self, a: Any) -> Any:
        return self._apply("sqrt", a)

    def rsqrt(self, a: Any) -> Any:
        """Elementwise a^(-1/2), defined as 0 where a <= 0."""
        return self._apply("rsqrt", a)

    def sin(self, a: Any) -> Any:
        return self._apply("sin", a)

    def cos(self, a: Any) -> Any:
        return self._apply("cos", a)

    def activation(self, name: str, a: Any) -> Any:
        if name not in ACTIVATIONS:
            raise ValueError(f"Unsupported activation '{name}'. Available: {', '.join(ACTIVATIONS)}")
        return self._apply(name, a)

    # --- reductions and structure -------------------------------------------

    def sum(self, a: Any, axis: Optional[int] = None) -> Any:
        return self._apply("sum", a, axis=axis)

    def mean(self, a: Any, axis: Optional[int] = None) -> Any:
        return self._apply("mean", a, axis=axis)

    def concat_rows(self, parts: Sequence[Any]) -> Any:
        """Stack vertically."""
        return self._apply("concat", *parts, axis=0)

    def concat_cols(self, parts: Sequence[Any]) -> Any:
        """Stack horizontally."""
        return self._apply("concat", *parts, axis=1)

    def slice(self, a: Any, rows: Optional[Tuple[int, int]] = None, cols: Optional[Tuple[int, int]] = None) -> Any:
        rows_count, cols_count = self.value(a).shape
        return self._apply("slice", a, rows=rows or (0, rows_count), cols=cols or (0, cols_count))

    def slice_rows(self, a: Any, start: int, stop: int) -> Any:
        return self.slice(a, rows=(start, stop))

    def slice_cols(self, a: Any, start: int, stop: int) -> Any:
        return self.slice(a, cols=(start, stop))

    def diag(self, v: Any) -> Any:
        return self._apply("diag", v)

    def eye(self, n: int) -> Any:
        return self.constant(np.eye(n))


class EagerOps(Ops):
    """Immediate numpy execution; handles are plain arrays."""

    def _apply(self, name: str, *inputs: Any, **attrs: Any) -> Tensor:
        primitive = get_primitive(name)
        value, _ = primitive.forward(*(as_tensor(x) for x in inputs), **attrs)
        if not np.all(np.isfinite(value)):
            raise NonFiniteValueError(name)
        return value

    def constant(self, value: Any) -> Tensor:
        return as_tensor(value)

    def parameter(self, name: str, value: Any) -> Tensor:
        return as_tensor(value)

    def value(self, handle: Any) -> Tensor:
        return as_tensor(handle)


EAGER = EagerOps()
