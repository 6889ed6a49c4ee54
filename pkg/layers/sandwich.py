#!/usr/bin/env python3
"""
Sandwich Layer

1-Lipschitz nonlinear layer g(x) = sqrt(2) A^T Psi sigma(sqrt(2) Psi^-1 B x + b)
where [A B] is semi-orthogonal and Psi = diag(exp(d)) is positive.
"""

import math
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, Optional, Tuple

import numpy as np

from autodiff.ops import EAGER, Ops
from configuration import DEFAULT_ACTIVATION
from layers.linear import Layer, uniform_init
from layers.weights import make_semi_orthogonal

SQRT2 = math.sqrt(2.0)


def sandwich_map(ops: Ops, A: Any, B: Any, psi: Any, b: Any, x: Any, activation: str = DEFAULT_ACTIVATION) -> Any:
    """Apply the sandwich expression to a column batch `x` for explicit A, B and Psi entries."""
    pre_activation = ops.add(ops.scale(ops.div(ops.matmul(B, x), psi), SQRT2), b)
    hidden = ops.mul(psi, ops.activation(activation, pre_activation))
    return ops.scale(ops.matmul(ops.transpose(A), hidden), SQRT2)


@dataclass(frozen=True)
class SandwichLayer(Layer):
    """
    Sandwich layer from in_dim to out_dim.

    Free parameters: U (out x out) and V (in x out) parameterize Q = [A B]
    (out x (out + in)) through the reduced Cayley transform, d (out x 1) gives
    Psi = diag(exp(d)) and b (out x 1) is the inner bias.
    """
    activation: Optional[str] = DEFAULT_ACTIVATION

    kind: ClassVar[str] = "sandwich"

    def _validate_layer(self) -> None:
        super()._validate_layer()
        if self.activation is None:
            raise ValueError("sandwich layers need a 1-Lipschitz activation")

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {"U": (self.out_dim, self.out_dim), "V": (self.in_dim, self.out_dim),
                "d": (self.out_dim, 1), "b": (self.out_dim, 1)}

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        """Semi-orthogonal Q = [A B]."""
        return make_semi_orthogonal(p["U"], p["V"], ops=ops)

    def derive(self, ops: Ops, p: Dict[str, Any]) -> Dict[str, Any]:
        Q = self.weight(ops, p)
        return {
            "A": ops.slice_cols(Q, 0, self.out_dim),
            "B": ops.slice_cols(Q, self.out_dim, self.out_dim + self.in_dim),
            "psi": ops.exp(p["d"]),
            "b": p["b"],
        }

    def apply(self, ops: Ops, derived: Dict[str, Any], x: Any) -> Any:
        return sandwich_map(ops, derived["A"], derived["B"], derived["psi"], derived["b"], x, self.activation)

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = DEFAULT_ACTIVATION) -> 'SandwichLayer':
        return cls(in_dim, out_dim, {
            "U": uniform_init(rng, (out_dim, out_dim), in_dim),
            "V": uniform_init(rng, (in_dim, out_dim), in_dim),
            "d": np.zeros((out_dim, 1)),
            "b": np.zeros((out_dim, 1)),
        }, activation or DEFAULT_ACTIVATION)


def sandwich_forward(layer: SandwichLayer, x: Any, ops: Ops = EAGER) -> Any:
    """Evaluate a sandwich layer on a column batch."""
    return layer.forward(x, ops)
