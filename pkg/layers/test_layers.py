#!/usr/bin/env python3
"""
Test Layers Module

Layer evaluation, the sandwich layer and gradient flow into free parameters.
"""

import math

import numpy as np
import pytest

from autodiff.errors import ShapeMismatchError
from autodiff.grad_check import grad_check
from autodiff.graph import Graph
from autodiff.ops import EAGER
from layers.linear import AOLLinear, CayleyLinear, OrthogonalLinear, PlainLinear, SNLinear
from layers.sandwich import SandwichLayer, sandwich_forward, sandwich_map

LAYER_TYPES = [PlainLinear, SNLinear, AOLLinear, CayleyLinear, OrthogonalLinear, SandwichLayer]


def _random_layer(layer_type, in_dim, out_dim, rng, activation="tanh"):
    layer = layer_type.initialize(in_dim, out_dim, rng, activation)
    params = {name: rng.standard_normal(value.shape) for name, value in layer.params.items()}
    return layer.with_params(params)


class TestLayerConstruction:
    """Test cases for layer records."""

    def test_parameter_shape_validation(self):
        """Test that free parameters must have the declared shapes."""
        with pytest.raises(ShapeMismatchError, match="'W'"):
            PlainLinear(2, 3, {"W": np.zeros((2, 3)), "b": np.zeros((3, 1))})

    def test_missing_parameter_rejected(self):
        """Test that every declared parameter is required."""
        with pytest.raises(ValueError, match="expects parameters"):
            SNLinear(2, 3, {"A": np.zeros((3, 2))})

    def test_with_params_returns_new_record(self):
        """Test that parameter updates leave the original layer untouched."""
        rng = np.random.default_rng(0)
        layer = PlainLinear.initialize(2, 3, rng)
        updated = layer.with_params({"W": np.ones((3, 2)), "b": np.ones((3, 1))})

        assert not np.array_equal(layer.params["W"], updated.params["W"])
        np.testing.assert_array_equal(updated.params["W"], np.ones((3, 2)))

    def test_initialization_ranges(self):
        """Test uniform(+-1/sqrt(fan_in)) free matrices and zero biases."""
        layer = SandwichLayer.initialize(16, 8, np.random.default_rng(1))

        assert np.all(np.abs(layer.params["U"]) <= 0.25)
        assert np.all(np.abs(layer.params["V"]) <= 0.25)
        np.testing.assert_array_equal(layer.params["d"], np.zeros((8, 1)))
        np.testing.assert_array_equal(layer.params["b"], np.zeros((8, 1)))

    @pytest.mark.parametrize("layer_type", [SNLinear, AOLLinear, CayleyLinear, OrthogonalLinear])
    def test_constrained_weights_are_nonexpansive(self, layer_type):
        """Test sigma_max(W) <= 1 for random parameters of each linear construction."""
        rng = np.random.default_rng(2)
        for in_dim, out_dim in [(3, 5), (5, 3), (4, 4)]:
            layer = _random_layer(layer_type, in_dim, out_dim, rng)
            assert np.linalg.svd(layer.weight_matrix(), compute_uv=False)[0] <= 1.0 + 1e-9

    def test_parameter_count(self):
        """Test the reduced semi-orthogonal parameter count."""
        layer = OrthogonalLinear.initialize(21, 1, np.random.default_rng(3))

        assert layer.parameter_count() == 21 + 1


class TestSandwichLayer:
    """Test cases for the sandwich layer."""

    @pytest.mark.parametrize("activation", ["relu", "tanh"])
    def test_zero_input_zero_bias(self, activation):
        """Test that b = 0 and x = 0 give 0."""
        layer = _random_layer(SandwichLayer, 3, 4, np.random.default_rng(4), activation)
        layer = layer.with_params({**layer.params, "b": np.zeros((4, 1))})

        np.testing.assert_array_equal(sandwich_forward(layer, np.zeros((3, 2))), np.zeros((4, 2)))

    def test_scalar_substitution(self):
        """Test A = B = 1/sqrt(2), Psi = 1, b = 0, relu at x = 1."""
        half = np.array([[1.0 / math.sqrt(2.0)]])

        y = sandwich_map(EAGER, half, half, np.array([[1.0]]), np.array([[0.0]]), np.array([[1.0]]), "relu")

        assert abs(y[0, 0] - 1.0) < 1e-14

    def test_semi_orthogonal_blocks(self):
        """Test Q Q^T = I for Q = [A B] and positive Psi at random parameters."""
        rng = np.random.default_rng(5)
        for _ in range(100):
            in_dim, out_dim = (int(v) for v in rng.integers(1, 10, size=2))
            layer = _random_layer(SandwichLayer, in_dim, out_dim, rng)
            derived = layer.derive(EAGER, layer.params)
            Q = np.hstack([derived["A"], derived["B"]])
            assert np.linalg.norm(Q @ Q.T - np.eye(out_dim)) < 1e-10
            assert np.all(derived["psi"] > 0)

    def test_output_dimension(self):
        """Test that the layer maps in_dim columns to out_dim columns."""
        layer = SandwichLayer.initialize(2, 21, np.random.default_rng(6))

        assert sandwich_forward(layer, np.ones((2, 7))).shape == (21, 7)

    def test_linear_activation_rejected(self):
        """Test that sandwich layers require an activation."""
        layer = SandwichLayer.initialize(2, 3, np.random.default_rng(7))

        with pytest.raises(ValueError, match="activation"):
            SandwichLayer(2, 3, layer.params, None)


class TestLayerGradients:
    """Gradient flow from layer outputs into free parameters."""

    @pytest.mark.parametrize("layer_type", LAYER_TYPES, ids=lambda t: t.kind)
    def test_matches_finite_differences(self, layer_type):
        """Test reverse-mode gradients at 10 random parameter draws."""
        rng = np.random.default_rng(len(layer_type.kind))
        for trial in range(10):
            in_dim, out_dim = (3, 4) if trial % 2 else (4, 3)
            layer = _random_layer(layer_type, in_dim, out_dim, rng)
            graph = Graph()
            p = {name: graph.input(name, value) for name, value in layer.params.items()}
            out = layer.forward(rng.standard_normal((in_dim, 5)), graph, p)
            loss = graph.sum(graph.mul(out, rng.standard_normal((out_dim, 5))))

            report = grad_check(graph, loss, tolerance=1e-6)

            assert report.passed, f"{layer_type.kind}: {report.per_parameter}"

    def test_sandwich_output_sum_at_init(self):
        """Test the sandwich output sum against finite differences at initialization."""
        layer = SandwichLayer.initialize(2, 21, np.random.default_rng(8))
        graph = Graph()
        p = {name: graph.input(name, value) for name, value in layer.params.items()}
        out = graph.sum(layer.forward(np.random.default_rng(9).standard_normal((2, 4)), graph, p))

        report = grad_check(graph, out, tolerance=1e-6)

        assert report.passed
        assert set(report.per_parameter) == {"U", "V", "d", "b"}
