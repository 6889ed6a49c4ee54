#!/usr/bin/env python3
"""
Test Lipschitz Estimator Module

Tests for empirical lower bounds, bound ordering and local Lipschitz grids.
"""

import json
import os
import tempfile

import numpy as np
import pandas as pd
import pytest

from estimation.lipschitz_estimator import (
    EstimationSettings,
    empirical_lower_bound,
    local_lipschitz_grid,
    project_ball,
)
from layers.policy_network import build_policy, certified_upper_bound
from layers.sandwich import SandwichLayer

UNIT_BOX = ((-1.0, 1.0), (-1.0, 1.0))


def _linear(matrix):
    return lambda ops, x: ops.matmul(matrix, x)


class TestEmpiricalLowerBound:
    """Test cases for empirical_lower_bound."""

    def test_identity(self):
        """Test that the identity map has lower bound 1."""
        estimate = empirical_lower_bound(lambda ops, x: x, UNIT_BOX, restarts=3, iters=10)

        assert abs(estimate.lower_bound - 1.0) < 1e-12

    def test_diagonal_recovers_sigma_max(self):
        """Test diag(2, 0.5) with 20 restarts and 500 iterations."""
        estimate = empirical_lower_bound(_linear(np.diag([2.0, 0.5])), UNIT_BOX, epsilon=0.1,
                                         restarts=20, iters=500)

        assert abs(estimate.lower_bound - 2.0) < 0.02
        assert estimate.lower_bound <= 2.0 + 1e-12

    def test_random_linear_recovers_sigma_max(self):
        """Test a random 3x2 linear map against its SVD."""
        matrix = np.random.default_rng(0).standard_normal((3, 2))
        sigma = np.linalg.svd(matrix, compute_uv=False)[0]

        estimate = empirical_lower_bound(_linear(matrix), UNIT_BOX, restarts=10, iters=300)

        assert abs(estimate.lower_bound - sigma) < 0.01 * sigma

    def test_constant_map_is_flagged(self):
        """Test that a constant policy returns 0 and is flagged at the default iteration count."""
        estimate = empirical_lower_bound(lambda ops, x: ops.constant(np.ones((1, 4))), UNIT_BOX, restarts=4)

        assert estimate.iterations == 500
        assert estimate.lower_bound == 0.0
        assert estimate.constant
        assert estimate.history == [0.0] * 501

    def test_small_gain_map_is_not_constant(self):
        """Test that a map with a small but nonzero gain keeps its ratio."""
        estimate = empirical_lower_bound(_linear(np.array([[1e-4, 0.0]])), UNIT_BOX, restarts=4)

        assert not estimate.constant
        assert abs(estimate.lower_bound - 1e-4) < 1e-6

    def test_plain_mlp_below_certified_bound(self):
        """Test that a random plain MLP stays below the product of spectral norms."""
        network = build_policy("plain", seed=1)

        estimate = empirical_lower_bound(network, restarts=5, iters=100)

        assert estimate.lower_bound <= certified_upper_bound(network)
        assert 0.0 < estimate.tightness <= 1.0

    def test_feasibility_of_maximizer(self):
        """Test that the reported pair lies in the domain and the epsilon-ball."""
        network = build_policy("sandwich", gamma=4.0, seed=2)

        estimate = empirical_lower_bound(network, epsilon=0.1, restarts=4, iters=50)

        assert np.linalg.norm(estimate.v) <= 0.1 + 1e-12
        assert -np.pi <= estimate.x[0] <= np.pi
        assert -8.0 <= estimate.x[1] <= 8.0

    def test_history_is_monotone(self):
        """Test that the best ratio so far never decreases."""
        estimate = empirical_lower_bound(build_policy("plain", seed=3), restarts=4, iters=60)

        assert len(estimate.history) == 61
        assert all(b >= a for a, b in zip(estimate.history, estimate.history[1:]))

    def test_same_seed_same_estimate(self):
        """Test restart determinism."""
        network = build_policy("sandwich", gamma=4.0, seed=4)

        first = empirical_lower_bound(network, restarts=3, iters=40, seed=9)
        second = empirical_lower_bound(network, restarts=3, iters=40, seed=9)

        assert first.lower_bound == second.lower_bound
        np.testing.assert_array_equal(first.x, second.x)

    def test_invalid_arguments(self):
        """Test epsilon and domain validation."""
        with pytest.raises(ValueError, match="epsilon"):
            empirical_lower_bound(lambda ops, x: x, UNIT_BOX, epsilon=0.0)
        with pytest.raises(ValueError, match="degenerate"):
            empirical_lower_bound(lambda ops, x: x, ((0.0, 0.0), (-1.0, 1.0)))


class TestBoundOrdering:
    """Empirical lower bounds never exceed certified bounds."""

    @pytest.mark.parametrize("architecture", ["sn", "aol", "cayley", "sandwich"])
    def test_random_constrained_networks(self, architecture):
        """Test lower <= gamma (1 + 1e-6) for random networks across gamma in {1, 4, 10}."""
        rng = np.random.default_rng(len(architecture))
        for draw in range(25):
            gamma = (1.0, 4.0, 10.0)[draw % 3]
            network = build_policy(architecture, widths=(8, 8), gamma=gamma, seed=draw)
            params = {name: rng.standard_normal(value.shape) for name, value in network.parameters().items()}
            network = network.with_parameters(params)

            estimate = empirical_lower_bound(network, restarts=4, iters=40, seed=draw)

            assert estimate.lower_bound <= gamma * (1.0 + 1e-6)

    def test_random_sandwich_layer_is_one_lipschitz(self):
        """Test that a single sandwich layer has empirical bound at most 1."""
        rng = np.random.default_rng(5)
        layer = SandwichLayer.initialize(2, 6, rng)
        layer = layer.with_params({name: rng.standard_normal(value.shape) for name, value in layer.params.items()})

        estimate = empirical_lower_bound(lambda ops, x: layer.forward(x, ops), restarts=10, iters=200)

        assert estimate.lower_bound <= 1.0 + 1e-6


class TestLocalLipschitzGrid:
    """Test cases for local_lipschitz_grid."""

    def test_constant_policy_gives_zero_grid(self):
        """Test all-zero cells for a constant map at the default iteration count."""
        grid = local_lipschitz_grid(lambda ops, x: ops.scale(ops.sum(x, axis=0), 0.0), resolution=3, restarts=1)

        np.testing.assert_array_equal(grid.values, np.zeros((3, 3)))

    def test_linear_policy_gives_uniform_sigma_max(self):
        """Test that every cell of a linear policy recovers sigma_max."""
        matrix = np.array([[1.5, -0.4]])
        sigma = np.linalg.norm(matrix)

        grid = local_lipschitz_grid(_linear(matrix), resolution=(4, 3), restarts=2, iters=400)

        assert grid.values.shape == (4, 3)
        assert np.all(np.abs(grid.values - sigma) < 0.01 * sigma)

    def test_sandwich_cells_below_gamma(self):
        """Test that local bounds of a gamma = 4 sandwich policy stay below 4."""
        grid = local_lipschitz_grid(build_policy("sandwich", gamma=4.0, seed=6), resolution=5,
                                    restarts=2, iters=50)

        assert grid.values.max() <= 4.0 + 1e-6

    def test_chunking_matches_single_graph(self):
        """Test that splitting the columns into chunks leaves results unchanged."""
        network = build_policy("plain", widths=(8,), seed=7)

        whole = local_lipschitz_grid(network, resolution=3, restarts=2, iters=20, chunk_columns=100)
        chunked = local_lipschitz_grid(network, resolution=3, restarts=2, iters=20, chunk_columns=4)

        np.testing.assert_allclose(whole.values, chunked.values, rtol=1e-10)

    def test_save_writes_csv_and_axes(self):
        """Test the CSV + JSON sidecar output."""
        grid = local_lipschitz_grid(_linear(np.eye(2)), resolution=3, restarts=1, iters=2)
        with tempfile.TemporaryDirectory() as temp_dir:
            path = grid.save(os.path.join(temp_dir, "local_lipschitz.csv"))
            frame = pd.read_csv(path)
            with open(os.path.join(temp_dir, "local_lipschitz.json")) as f:
                axes = json.load(f)

        assert frame.shape == (3, 3)
        assert axes["rows"] == "alpha"
        assert len(axes["alpha_dot"]) == 3

    def test_resolution_validation(self):
        """Test that grids smaller than 2x2 are rejected."""
        with pytest.raises(ValueError, match="2x2"):
            local_lipschitz_grid(lambda ops, x: x, resolution=1)


class TestHelpers:
    """Test cases for projection and settings."""

    def test_project_ball(self):
        """Test radial projection and the minimum-norm floor."""
        v = np.array([[3.0, 0.0, 1e-9], [4.0, 0.0, 0.0]])

        projected = project_ball(v, 1.0, floor=1e-6)

        np.testing.assert_allclose(np.linalg.norm(projected, axis=0), [1.0, 1e-6, 1e-6])

    def test_settings_round_trip(self):
        """Test dict conversion of estimation settings."""
        settings = EstimationSettings(epsilon=0.2, restarts=3)

        assert EstimationSettings.from_dict(settings.to_dict()) == settings

    def test_settings_validation(self):
        """Test that non-positive epsilon is rejected."""
        with pytest.raises(ValueError, match="epsilon"):
            EstimationSettings(epsilon=-1.0)
