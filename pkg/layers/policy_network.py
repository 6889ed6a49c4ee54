#!/usr/bin/env python3
"""
Policy Networks

Assembly of layer stacks into policy networks with a Lipschitz budget gamma,
certified upper bounds and JSON (de)serialization of the free parameters.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from autodiff.ops import EAGER, Ops
from autodiff.primitives import ACTIVATIONS
from autodiff.tensor import Tensor, as_tensor
from configuration import DEFAULT_ACTIVATION, PLAIN_HIDDEN_WIDTHS, SANDWICH_HIDDEN_WIDTHS
from layers.linear import AOLLinear, CayleyLinear, Layer, OrthogonalLinear, PlainLinear, SNLinear
from layers.sandwich import SandwichLayer
from logger.log_wrapper import get_logger

logger = get_logger("layers:policy_network", __name__)


class Architecture(Enum):
    PLAIN = "plain"
    SN = "sn"
    AOL = "aol"
    CAYLEY = "cayley"
    SANDWICH = "sandwich"

    @property
    def constrained(self) -> bool:
        return self is not Architecture.PLAIN

    @classmethod
    def parse(cls, value: Any) -> 'Architecture':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown architecture '{value}'. "
                             f"Available: {', '.join(a.value for a in cls)}") from None


LAYER_TYPES: Dict[str, Type[Layer]] = {
    layer_type.kind: layer_type
    for layer_type in (PlainLinear, SNLinear, AOLLinear, CayleyLinear, OrthogonalLinear, SandwichLayer)
}

_HIDDEN_LAYER: Dict[Architecture, Type[Layer]] = {
    Architecture.PLAIN: PlainLinear,
    Architecture.SN: SNLinear,
    Architecture.AOL: AOLLinear,
    Architecture.CAYLEY: CayleyLinear,
    Architecture.SANDWICH: SandwichLayer,
}

_OUTPUT_LAYER: Dict[Architecture, Type[Layer]] = {
    **_HIDDEN_LAYER,
    Architecture.SANDWICH: OrthogonalLinear,
}


def default_widths(architecture: Any) -> Tuple[int, ...]:
    """Hidden widths with comparable parameter counts: 4x21 for sandwich, 4x32 otherwise."""
    if Architecture.parse(architecture) is Architecture.SANDWICH:
        return tuple(SANDWICH_HIDDEN_WIDTHS)
    return tuple(PLAIN_HIDDEN_WIDTHS)


@dataclass(frozen=True)
class PolicyNetwork:
    """
    Ordered layer stack with an optional Lipschitz budget.

    For constrained architectures the network computes
    sqrt(gamma) * g_L(... g_1(sqrt(gamma) * x)), so its certified bound is gamma.

    Attributes:
        architecture: Layer construction used by every layer
        layers: Hidden layers followed by the linear output layer
        gamma: Lipschitz budget (None for plain networks)
        activation: Hidden activation
        input_dim: Observation dimension
        output_dim: Action dimension
    """
    architecture: Architecture
    layers: Tuple[Layer, ...]
    gamma: Optional[float]
    activation: str
    input_dim: int
    output_dim: int

    def __post_init__(self) -> None:
        self._validate_network()

    def _validate_network(self) -> None:
        if not self.layers:
            raise ValueError("a policy network needs at least one layer")
        if self.layers[0].in_dim != self.input_dim or self.layers[-1].out_dim != self.output_dim:
            raise ValueError(f"layer dimensions do not match input {self.input_dim} / output {self.output_dim}")
        for previous, current in zip(self.layers, self.layers[1:]):
            if previous.out_dim != current.in_dim:
                raise ValueError(f"layer widths {previous.out_dim} -> {current.in_dim} are inconsistent")
        _validate_gamma(self.architecture, self.gamma)

    @property
    def widths(self) -> Tuple[int, ...]:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    @property
    def scale(self) -> Optional[float]:
        return math.sqrt(self.gamma) if self.gamma is not None else None

    # --- parameters -----------------------------------------------------------

    def parameters(self) -> Dict[str, Tensor]:
        """Free parameters keyed 'layer{i}/{name}'."""
        return {f"layer{i}/{name}": value
                for i, layer in enumerate(self.layers) for name, value in layer.params.items()}

    def with_parameters(self, params: Dict[str, Tensor]) -> 'PolicyNetwork':
        """Copy of the network with new free parameter values."""
        layers = tuple(layer.with_params({name: params[f"layer{i}/{name}"] for name in layer.params})
                       for i, layer in enumerate(self.layers))
        return replace(self, layers=layers)

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def bind(self, ops: Ops, prefix: str = "", trainable: bool = True) -> Dict[str, Any]:
        """Wrap the free parameters for `ops`; graph inputs are named prefix + key."""
        if trainable:
            return {name: ops.parameter(prefix + name, value) for name, value in self.parameters().items()}
        return {name: ops.constant(value) for name, value in self.parameters().items()}

    # --- evaluation -----------------------------------------------------------

    def derive(self, ops: Ops, handles: Dict[str, Any]) -> List[Dict[str, Any]]:
        """Derived weights of every layer."""
        return [layer.derive(ops, {name: handles[f"layer{i}/{name}"] for name in layer.params})
                for i, layer in enumerate(self.layers)]

    def apply(self, ops: Ops, derived: Sequence[Dict[str, Any]], x: Any) -> Any:
        h = x
        if self.scale is not None:
            h = ops.scale(h, self.scale)
        for layer, weights in zip(self.layers, derived):
            h = layer.apply(ops, weights, h)
        if self.scale is not None:
            h = ops.scale(h, self.scale)
        return h

    def forward(self, ops: Ops, x: Any, handles: Optional[Dict[str, Any]] = None) -> Any:
        """Evaluate on a column batch x of shape (input_dim, batch)."""
        if handles is None:
            handles = self.bind(ops, trainable=False)
        return self.apply(ops, self.derive(ops, handles), x)

    def __call__(self, x: Any) -> Tensor:
        return self.forward(EAGER, as_tensor(x))

    def compiled(self) -> Callable[[Any], Tensor]:
        """Eager function with the derived weights computed once."""
        derived = self.derive(EAGER, self.parameters())

        def evaluate_policy(x: Any) -> Tensor:
            return self.apply(EAGER, derived, as_tensor(x))

        return evaluate_policy

    # --- certification -------------------------------------------------------

    def layer_spectral_norms(self) -> List[float]:
        return [layer.spectral_norm() for layer in self.layers]

    # --- serialization --------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "architecture": self.architecture.value,
            "widths": list(self.widths),
            "gamma": self.gamma,
            "activation": self.activation,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "layers": [
                {
                    "kind": layer.kind,
                    "in_dim": layer.in_dim,
                    "out_dim": layer.out_dim,
                    "activation": layer.activation,
                    "params": {name: np.asarray(value).tolist() for name, value in layer.params.items()},
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> 'PolicyNetwork':
        layers = []
        for entry in document["layers"]:
            if entry["kind"] not in LAYER_TYPES:
                raise ValueError(f"Unknown layer kind '{entry['kind']}' in checkpoint")
            layer_type = LAYER_TYPES[entry["kind"]]
            params = {name: as_tensor(value) for name, value in entry["params"].items()}
            layers.append(layer_type(entry["in_dim"], entry["out_dim"], params, entry["activation"]))
        gamma = document.get("gamma")
        return cls(
            architecture=Architecture.parse(document["architecture"]),
            layers=tuple(layers),
            gamma=float(gamma) if gamma is not None else None,
            activation=document["activation"],
            input_dim=int(document["input_dim"]),
            output_dim=int(document["output_dim"]),
        )


def _validate_gamma(architecture: Architecture, gamma: Optional[float]) -> None:
    if not architecture.constrained:
        if gamma is not None:
            raise ValueError("gamma cannot be set for a plain network")
        return
    if gamma is None:
        raise ValueError(f"{architecture.value} networks need a Lipschitz budget gamma")
    if not math.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def build_policy(architecture: Any, widths: Optional[Sequence[int]] = None, gamma: Optional[float] = None,
                 seed: int = 0, input_dim: int = 2, output_dim: int = 1,
                 activation: str = DEFAULT_ACTIVATION) -> PolicyNetwork:
    """
    Initialize a policy network.

    Args:
        architecture: plain, sn, aol, cayley or sandwich
        widths: Hidden widths (architecture default when omitted)
        gamma: Lipschitz budget; required for constrained architectures, rejected for plain
        seed: Initialization seed
        input_dim: Observation dimension
        output_dim: Action dimension
        activation: Hidden activation

    Returns:
        PolicyNetwork with uniform(+-1/sqrt(fan_in)) free matrices and zero biases
    """
    architecture = Architecture.parse(architecture)
    widths = tuple(default_widths(architecture) if widths is None else widths)
    if any(int(width) < 1 for width in widths):
        raise ValueError(f"hidden widths must be positive, got {list(widths)}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"Unsupported activation '{activation}'")
    gamma = float(gamma) if gamma is not None else None
    _validate_gamma(architecture, gamma)

    rng = np.random.default_rng(seed)
    dims = (input_dim, *widths, output_dim)
    layers: List[Layer] = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        layer_type = _OUTPUT_LAYER[architecture] if last else _HIDDEN_LAYER[architecture]
        layers.append(layer_type.initialize(int(fan_in), int(fan_out), rng, None if last else activation))

    network = PolicyNetwork(architecture, tuple(layers), gamma, activation, input_dim, output_dim)
    logger.debug(f"Built {architecture.value} policy {list(dims)} (gamma={gamma}, "
                 f"{network.parameter_count()} parameters)")
    return network


def certified_upper_bound(network: PolicyNetwork) -> float:
    """
    Certified Lipschitz upper bound.

    Plain networks get the product of layer spectral norms (tanh is 1-Lipschitz);
    constrained networks are gamma-Lipschitz by construction.
    """
    if network.architecture.constrained:
        return float(network.gamma)
    return float(np.prod(network.layer_spectral_norms()))
