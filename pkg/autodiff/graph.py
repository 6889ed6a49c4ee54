#!/usr/bin/env python3
"""
Computation Graph

Append-only tape of primitive applications. Values are computed while the tape
is recorded, so models can branch on shapes; `evaluate` replays the tape for
new input values and `backward` walks it once in reverse insertion order.
Operations whose inputs are all constants are folded into a constant node.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from autodiff.errors import BackwardBeforeForwardError, NonFiniteValueError, ShapeMismatchError
from autodiff.ops import Ops
from autodiff.primitives import get_primitive
from autodiff.tensor import Tensor, as_tensor, frozen
from logger.log_wrapper import get_logger

logger = get_logger("autodiff:graph", __name__)

INPUT = "input"
CONSTANT = "constant"


@dataclass(frozen=True)
class Node:
    """Handle to one tape entry."""
    id: int
    op: str
    inputs: Tuple[int, ...] = ()
    attrs: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)
    name: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return self.op in (INPUT, CONSTANT)


class Graph(Ops):
    """A recorded tape of primitive operations over 2-D f64 tensors."""

    def __init__(self):
        self.nodes: List[Node] = []
        self.values: List[Tensor] = []
        self.aux: List[Any] = []
        self.inputs: Dict[str, Node] = {}
        self.outputs: Dict[str, Node] = {}
        self._forward_valid = True

    def __len__(self) -> int:
        return len(self.nodes)

    # --- recording ---------------------------------------------------------

    def _append(self, op: str, value: Tensor, aux: Any = None, inputs: Tuple[int, ...] = (),
                attrs: Optional[Dict[str, Any]] = None, name: Optional[str] = None) -> Node:
        node = Node(id=len(self.nodes), op=op, inputs=inputs, attrs=attrs or {}, name=name)
        self.nodes.append(node)
        self.values.append(value)
        self.aux.append(aux)
        return node

    def input(self, name: str, value: Any) -> Node:
        """Declare a named differentiable leaf; re-declaring a name returns the same node."""
        if name in self.inputs:
            existing = self.inputs[name]
            if self.values[existing.id].shape != as_tensor(value).shape:
                raise ShapeMismatchError(
                    f"Input '{name}' re-declared with shape {as_tensor(value).shape}, "
                    f"expected {self.values[existing.id].shape}")
            return existing
        node = self._append(INPUT, frozen(value), name=name)
        self.inputs[name] = node
        return node

    def parameter(self, name: str, value: Any) -> Node:
        return self.input(name, value)

    def constant(self, value: Any) -> Node:
        if isinstance(value, Node):
            return value
        return self._append(CONSTANT, frozen(value))

    def output(self, name: str, node: Node) -> Node:
        """Register `node` as a named output returned by `evaluate`."""
        self._check_node(node)
        self.outputs[name] = node
        return node

    def value(self, handle: Any) -> Tensor:
        if isinstance(handle, Node):
            self._check_node(handle)
            return self.values[handle.id]
        return as_tensor(handle)

    def _lift(self, x: Any) -> Node:
        if isinstance(x, Node):
            self._check_node(x)
            return x
        return self.constant(x)

    def _apply(self, name: str, *inputs: Any, **attrs: Any) -> Node:
        primitive = get_primitive(name)
        nodes = [self._lift(x) for x in inputs]
        value, aux = primitive.forward(*(self.values[n.id] for n in nodes), **attrs)
        node_id = len(self.nodes)
        if not np.all(np.isfinite(value)):
            raise NonFiniteValueError(name, node_id)
        if all(self.nodes[n.id].op == CONSTANT for n in nodes):
            return self._append(CONSTANT, frozen(value))
        value.setflags(write=False)
        return self._append(name, value, aux, tuple(n.id for n in nodes), attrs)

    def _check_node(self, node: Node) -> None:
        if node.id >= len(self.nodes) or self.nodes[node.id] is not node:
            raise ValueError(f"Node {node.id} does not belong to this graph")

    # --- replay --------------------------------------------------------------

    def set_inputs(self, inputs: Dict[str, Any]) -> None:
        """Replace input values without replaying; gradients are unavailable until `evaluate` runs."""
        for name, value in inputs.items():
            if name not in self.inputs:
                raise KeyError(f"Unknown graph input '{name}'")
            node = self.inputs[name]
            tensor = frozen(value)
            if tensor.shape != self.values[node.id].shape:
                raise ShapeMismatchError(
                    f"Input '{name}' has shape {tensor.shape}, declared {self.values[node.id].shape}")
            self.values[node.id] = tensor
        self._forward_valid = False

    def run_forward(self) -> None:
        """Recompute every non-leaf node from the current leaf values."""
        self._forward_valid = False
        for node in self.nodes:
            if node.is_leaf:
                continue
            primitive = get_primitive(node.op)
            value, aux = primitive.forward(*(self.values[i] for i in node.inputs), **node.attrs)
            if not np.all(np.isfinite(value)):
                raise NonFiniteValueError(node.op, node.id)
            value.setflags(write=False)
            self.values[node.id] = value
            self.aux[node.id] = aux
        self._forward_valid = True

    # --- reverse mode --------------------------------------------------------

    def gradients(self, output: Node, seed: Any = None,
                  wrt: Optional[Iterable[str]] = None) -> Dict[str, Tensor]:
        """
        Reverse-mode gradients of `output` with respect to named inputs.

        Args:
            output: Node to differentiate
            seed: Adjoint of the output (defaults to ones)
            wrt: Input names to report (defaults to every input)

        Returns:
            Dict mapping input names to gradients (zeros where unreachable)
        """
        self._check_node(output)
        if not self._forward_valid:
            raise BackwardBeforeForwardError("backward requested before a completed forward pass")
        out_value = self.values[output.id]
        seed_tensor = np.ones_like(out_value) if seed is None else as_tensor(seed)
        if seed_tensor.shape != out_value.shape:
            raise ShapeMismatchError(f"Seed shape {seed_tensor.shape} does not match output shape {out_value.shape}")

        adjoints: List[Optional[Tensor]] = [None] * (output.id + 1)
        adjoints[output.id] = seed_tensor.astype(np.float64, copy=True)
        for node_id in range(output.id, -1, -1):
            adjoint = adjoints[node_id]
            node = self.nodes[node_id]
            if adjoint is None or node.is_leaf:
                continue
            primitive = get_primitive(node.op)
            input_grads = primitive.vjp(adjoint, self.values[node_id], self.aux[node_id],
                                        *(self.values[i] for i in node.inputs), **node.attrs)
            for input_id, grad in zip(node.inputs, input_grads):
                if grad is None or self.nodes[input_id].op == CONSTANT:
                    continue
                if adjoints[input_id] is None:
                    adjoints[input_id] = np.array(grad, dtype=np.float64, copy=True)
                else:
                    adjoints[input_id] += grad

        names = list(self.inputs) if wrt is None else list(wrt)
        result: Dict[str, Tensor] = {}
        for name in names:
            node = self.inputs[name]
            grad = adjoints[node.id] if node.id <= output.id else None
            result[name] = grad if grad is not None else np.zeros_like(self.values[node.id])
        return result


def evaluate(graph: Graph, inputs: Optional[Dict[str, Any]] = None,
             outputs: Optional[Iterable[str]] = None) -> Dict[str, Tensor]:
    """
    Replay `graph` with new input values.

    Args:
        graph: Recorded graph
        inputs: Named input values (missing inputs keep their current value)
        outputs: Output names to return (defaults to all registered outputs)

    Returns:
        Dict of output name to forward value
    """
    graph.set_inputs(inputs or {})
    graph.run_forward()
    names = list(graph.outputs) if outputs is None else list(outputs)
    return {name: graph.values[graph.outputs[name].id] for name in names}


def backward(graph: Graph, output: Node, seed: Any = None,
             wrt: Optional[Iterable[str]] = None) -> Dict[str, Tensor]:
    """Gradients of `output` (weighted by `seed`) for all leaf inputs of `graph`."""
    return graph.gradients(output, seed, wrt)
