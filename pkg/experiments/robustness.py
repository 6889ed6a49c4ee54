#!/usr/bin/env python3
"""
Robustness Thresholds

Smallest perturbation budget on an ascending grid at which a set of policies
is beaten, refined by one bisection between the bracketing grid points.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

from configuration import FAILURE_THRESHOLD
from logger.log_wrapper import get_logger

logger = get_logger("experiments:robustness", __name__)


@dataclass
class FailingEpsilon:
    """
    Outcome of a smallest-failing-budget search.

    Attributes:
        epsilon: Smallest failing budget (None when no grid budget fails)
        grid_epsilon: First failing grid budget
        monotone: False when a larger grid budget passed again after the first failure
        refined: True when the bisection midpoint was the failing budget
        rewards: Mean reward per evaluated budget, grid and midpoint alike
    """
    epsilon: Optional[float]
    grid_epsilon: Optional[float] = None
    monotone: bool = True
    refined: bool = False
    rewards: Dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "epsilon": "none" if self.epsilon is None else self.epsilon,
            "grid_epsilon": self.grid_epsilon,
            "monotone": self.monotone,
            "refined": self.refined,
            "rewards": {f"{budget:g}": reward for budget, reward in sorted(self.rewards.items())},
        }


def smallest_failing_epsilon(mean_reward: Callable[[float], float], grid: Sequence[float],
                             threshold: float = FAILURE_THRESHOLD, integer: bool = False,
                             label: str = "attack") -> FailingEpsilon:
    """
    Smallest budget whose mean evaluation reward drops below `threshold`.

    Args:
        mean_reward: Budget -> mean evaluation reward over the policy set
        grid: Strictly ascending budgets
        threshold: Failure threshold on the mean reward
        integer: Budgets are whole numbers (delays); the midpoint is rounded down
        label: Name used in log messages

    Returns:
        FailingEpsilon; a non-monotone grid returns the first failing grid budget unrefined

    Raises:
        ValueError: Empty or non-ascending grid
    """
    grid = [float(b) for b in grid]
    if not grid:
        raise ValueError("budget grid is empty")
    if any(later <= earlier for earlier, later in zip(grid, grid[1:])):
        raise ValueError("budget grid must be strictly ascending")

    rewards = {budget: float(mean_reward(budget)) for budget in grid}
    failing = [budget for budget in grid if rewards[budget] < threshold]
    if not failing:
        logger.info(f"{label}: no grid budget beats the policies (threshold {threshold:g})")
        return FailingEpsilon(epsilon=None, rewards=rewards)

    first = failing[0]
    index = grid.index(first)
    monotone = len(failing) == len(grid) - index
    if not monotone:
        passing = [f"{b:g}" for b in grid[index:] if rewards[b] >= threshold]
        logger.warning(f"{label}: non-monotone failure pattern, budgets {', '.join(passing)} pass again "
                       f"after {first:g} failed; reporting {first:g}")
        return FailingEpsilon(epsilon=first, grid_epsilon=first, monotone=False, rewards=rewards)
    if index == 0:
        return FailingEpsilon(epsilon=first, grid_epsilon=first, rewards=rewards)

    low = grid[index - 1]
    midpoint = (low + first) / 2
    if integer:
        midpoint = float(int(midpoint))
    if not low < midpoint < first:
        return FailingEpsilon(epsilon=first, grid_epsilon=first, rewards=rewards)

    rewards[midpoint] = float(mean_reward(midpoint))
    refined = rewards[midpoint] < threshold
    epsilon = midpoint if refined else first
    logger.info(f"{label}: smallest failing budget {epsilon:g} (grid {first:g}, midpoint reward "
                f"{rewards[midpoint]:.2f})")
    return FailingEpsilon(epsilon=epsilon, grid_epsilon=first, refined=refined, rewards=rewards)
