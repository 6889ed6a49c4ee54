#!/usr/bin/env python3
"""
Test Robustness Module

Smallest failing budget on ascending grids.
"""

import pytest

from experiments.robustness import smallest_failing_epsilon

GRID = (0.01, 0.02, 0.05, 0.08, 0.11, 0.15, 0.2, 0.3, 0.5)


def _linear_reward(slope: float):
    """Reward that falls linearly with the budget, with a call log."""
    calls = []

    def reward(budget: float) -> float:
        calls.append(budget)
        return -100.0 - slope * budget

    return reward, calls


class TestSmallestFailingEpsilon:
    """Test cases for smallest_failing_epsilon."""

    def test_failing_everywhere(self):
        """Test that a policy beaten at every budget reports the first grid point."""
        result = smallest_failing_epsilon(lambda budget: -1000.0, GRID, -400.0)

        assert result.epsilon == 0.01
        assert result.grid_epsilon == 0.01
        assert not result.refined

    def test_failing_nowhere(self):
        """Test that a policy never beaten reports 'none'."""
        result = smallest_failing_epsilon(lambda budget: -150.0, GRID, -400.0)

        assert result.epsilon is None
        assert result.to_dict()["epsilon"] == "none"
        assert len(result.rewards) == len(GRID)

    def test_bisection_refines(self):
        """Test that the midpoint replaces the grid point when it already fails."""
        reward, calls = _linear_reward(3000.0)

        result = smallest_failing_epsilon(reward, GRID, -400.0)

        # grid: 0.11 -> -430 fails, 0.08 -> -340 passes; midpoint 0.095 -> -385 passes
        assert result.grid_epsilon == 0.11
        assert result.epsilon == 0.11
        assert not result.refined
        assert calls[-1] == pytest.approx(0.095)

    def test_bisection_midpoint_fails(self):
        """Test a failing midpoint."""
        result = smallest_failing_epsilon(lambda budget: -1000.0 if budget > 0.09 else -200.0, GRID, -400.0)

        assert result.grid_epsilon == 0.11
        assert result.epsilon == pytest.approx(0.095)
        assert result.refined

    def test_integer_budgets(self):
        """Test that delay midpoints are whole samples and adjacent samples are not bisected."""
        result = smallest_failing_epsilon(lambda k: -500.0 if k >= 3 else -200.0, range(0, 9, 2), -400.0,
                                          integer=True)

        assert result.grid_epsilon == 4.0
        assert result.epsilon == 3.0

        adjacent = smallest_failing_epsilon(lambda k: -500.0 if k >= 2 else -200.0, range(9), -400.0,
                                            integer=True)
        assert adjacent.epsilon == 2.0
        assert not adjacent.refined

    def test_non_monotone(self):
        """Test that a grid that passes again after failing returns the first failure unrefined."""
        rewards = {0.01: -100.0, 0.02: -500.0, 0.05: -300.0, 0.08: -600.0}
        calls = []

        def reward(budget):
            calls.append(budget)
            return rewards[budget]

        result = smallest_failing_epsilon(reward, list(rewards), -400.0)

        assert result.epsilon == 0.02
        assert not result.monotone
        assert calls == list(rewards)

    @pytest.mark.parametrize("grid", [(), (0.1, 0.05), (0.1, 0.1)])
    def test_invalid_grid(self, grid):
        """Test that empty or non-ascending grids are rejected."""
        with pytest.raises(ValueError, match="grid"):
            smallest_failing_epsilon(lambda budget: 0.0, grid)
