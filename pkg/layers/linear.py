#!/usr/bin/env python3
"""
Linear Layers

Affine layers g(x) = W x + b whose weight W is either free (plain) or derived
from free parameters by a 1-Lipschitz construction. Inputs are column batches
of shape (in_dim, batch).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar, Dict, Optional, Tuple

import numpy as np

from autodiff.errors import ShapeMismatchError
from autodiff.ops import EAGER, Ops
from autodiff.primitives import PowerIterationCache, power_iteration
from autodiff.tensor import Tensor, as_tensor
from layers.weights import make_aol_weight, make_cayley_weight, make_semi_orthogonal, make_sn_weight


def uniform_init(rng: np.random.Generator, shape: Tuple[int, int], fan_in: int) -> Tensor:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draw."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True)
class Layer:
    """
    A layer with free parameters and a derived weight.

    Attributes:
        in_dim: Input dimension
        out_dim: Output dimension
        params: Free parameters by local name
        activation: Activation applied after the affine map (None for the output layer)
    """
    in_dim: int
    out_dim: int
    params: Dict[str, Tensor]
    activation: Optional[str] = None

    kind: ClassVar[str] = "layer"

    def __post_init__(self) -> None:
        self._validate_layer()

    def _validate_layer(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"{self.kind} layer dimensions must be positive, got {self.out_dim}x{self.in_dim}")
        expected = self.parameter_shapes()
        if set(self.params) != set(expected):
            raise ValueError(f"{self.kind} layer expects parameters {sorted(expected)}, got {sorted(self.params)}")
        for name, shape in expected.items():
            if as_tensor(self.params[name]).shape != shape:
                raise ShapeMismatchError(f"{self.kind} parameter '{name}' must be {shape}, "
                                         f"got {as_tensor(self.params[name]).shape}")

    # --- per-architecture hooks -------------------------------------------

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        raise NotImplementedError

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        raise NotImplementedError

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'Layer':
        raise NotImplementedError

    # --- shared behaviour ----------------------------------------------------

    def derive(self, ops: Ops, p: Dict[str, Any]) -> Dict[str, Any]:
        """Derived quantities used by `apply`."""
        return {"W": self.weight(ops, p), "b": p["b"]}

    def apply(self, ops: Ops, derived: Dict[str, Any], x: Any) -> Any:
        y = ops.add(ops.matmul(derived["W"], x), derived["b"])
        if self.activation is not None:
            y = ops.activation(self.activation, y)
        return y

    def forward(self, x: Any, ops: Ops = EAGER, p: Optional[Dict[str, Any]] = None) -> Any:
        """Evaluate the layer, binding its own parameters when none are given."""
        p = p if p is not None else ops.bind(self.params, trainable=False)
        return self.apply(ops, self.derive(ops, p), x)

    def weight_matrix(self) -> Tensor:
        """Eagerly derived weight."""
        return EAGER.value(self.weight(EAGER, self.params))

    def spectral_norm(self) -> float:
        sigma, _, _ = power_iteration(self.weight_matrix())
        return sigma

    def with_params(self, params: Dict[str, Tensor]) -> 'Layer':
        return replace(self, params={name: as_tensor(params[name]) for name in self.params})

    def parameter_count(self) -> int:
        return int(sum(as_tensor(value).size for value in self.params.values()))


@dataclass(frozen=True)
class PlainLinear(Layer):
    """Unconstrained W x + b."""
    kind: ClassVar[str] = "plain"

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {"W": (self.out_dim, self.in_dim), "b": (self.out_dim, 1)}

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        return p["W"]

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'PlainLinear':
        return cls(in_dim, out_dim, {"W": uniform_init(rng, (out_dim, in_dim), in_dim),
                                     "b": np.zeros((out_dim, 1))}, activation)


@dataclass(frozen=True)
class SNLinear(Layer):
    """Spectrally normalized W = A / sigma_max(A)."""
    cache: PowerIterationCache = field(default_factory=PowerIterationCache, compare=False, repr=False)

    kind: ClassVar[str] = "sn"

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {"A": (self.out_dim, self.in_dim), "b": (self.out_dim, 1)}

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        return make_sn_weight(p["A"], cache=self.cache, ops=ops)

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'SNLinear':
        return cls(in_dim, out_dim, {"A": uniform_init(rng, (out_dim, in_dim), in_dim),
                                     "b": np.zeros((out_dim, 1))}, activation)


@dataclass(frozen=True)
class AOLLinear(Layer):
    """Almost-orthogonal W = A D."""
    kind: ClassVar[str] = "aol"

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {"A": (self.out_dim, self.in_dim), "b": (self.out_dim, 1)}

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        return make_aol_weight(p["A"], ops=ops)

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'AOLLinear':
        return cls(in_dim, out_dim, {"A": uniform_init(rng, (out_dim, in_dim), in_dim),
                                     "b": np.zeros((out_dim, 1))}, activation)


@dataclass(frozen=True)
class CayleyLinear(Layer):
    """Orthogonal (sliced for rectangular shapes) Cayley weight."""
    kind: ClassVar[str] = "cayley"

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        size = max(self.in_dim, self.out_dim)
        return {"P": (size, size), "b": (self.out_dim, 1)}

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        return make_cayley_weight(p["P"], self.out_dim, self.in_dim, ops=ops)

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'CayleyLinear':
        size = max(in_dim, out_dim)
        return cls(in_dim, out_dim, {"P": uniform_init(rng, (size, size), in_dim),
                                     "b": np.zeros((out_dim, 1))}, activation)


@dataclass(frozen=True)
class OrthogonalLinear(Layer):
    """
    Semi-orthogonal linear layer with the reduced Cayley parameterization.

    The free blocks U (k x k) and V ((n-k) x k) use k = min(in, out) and
    n = max(in, out); the weight has orthonormal rows when out <= in and
    orthonormal columns otherwise.
    """
    kind: ClassVar[str] = "orthogonal"

    def parameter_shapes(self) -> Dict[str, Tuple[int, int]]:
        k, n = min(self.in_dim, self.out_dim), max(self.in_dim, self.out_dim)
        shapes = {"U": (k, k), "b": (self.out_dim, 1)}
        if n > k:
            shapes["V"] = (n - k, k)
        return shapes

    def weight(self, ops: Ops, p: Dict[str, Any]) -> Any:
        rows = make_semi_orthogonal(p["U"], p.get("V"), ops=ops)
        return rows if self.out_dim <= self.in_dim else ops.transpose(rows)

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, rng: np.random.Generator,
                   activation: Optional[str] = None) -> 'OrthogonalLinear':
        k, n = min(in_dim, out_dim), max(in_dim, out_dim)
        params = {"U": uniform_init(rng, (k, k), in_dim), "b": np.zeros((out_dim, 1))}
        if n > k:
            params["V"] = uniform_init(rng, (n - k, k), in_dim)
        return cls(in_dim, out_dim, params, activation)
