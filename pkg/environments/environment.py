#!/usr/bin/env python3
"""
Environment Base

Value-type control tasks over column batches. Each environment column owns an
independent random stream derived from (seed, column index).
"""

from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.ops import EAGER, Ops
from autodiff.tensor import Tensor


def env_streams(seed: int, n: int, offset: int = 0) -> List[np.random.Generator]:
    """Independent generators for columns offset..offset+n-1 of a seeded batch."""
    return [np.random.default_rng([seed, offset + i]) for i in range(n)]


class Environment(ABC):
    """Fully observed control task; observations are the states."""

    name: ClassVar[str]
    state_labels: ClassVar[Tuple[str, ...]]
    action_dim: ClassVar[int]

    @property
    def obs_dim(self) -> int:
        return len(self.state_labels)

    @property
    @abstractmethod
    def horizon(self) -> int:
        """Episode length in steps."""

    @property
    @abstractmethod
    def dt(self) -> float:
        """Seconds per step."""

    @property
    @abstractmethod
    def action_limit(self) -> float:
        """Symmetric actuator limit."""

    @abstractmethod
    def reset(self, rngs: Sequence[np.random.Generator]) -> Tensor:
        """Initial states, one column per stream."""

    @abstractmethod
    def step(self, states: Any, u: Any, noise: Any = None, ops: Ops = EAGER) -> Any:
        """Next states for (clipped) actions `u`."""

    @abstractmethod
    def reward(self, states: Any, u: Any, ops: Ops = EAGER) -> Any:
        """Per-column rewards, shape (1, n)."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON description {task, params}."""

    def sample_noise(self, rngs: Sequence[np.random.Generator]) -> Optional[Tensor]:
        return None

    def observe(self, states: Any) -> Any:
        return states

    def clip_action(self, u: Any, ops: Ops = EAGER) -> Any:
        if np.isinf(self.action_limit):
            return u
        return ops.clip(u, -self.action_limit, self.action_limit)

    def stabilized(self, states: np.ndarray, band: float, window: Optional[int] = None) -> np.ndarray:
        """
        Per-column success flag: |first state coordinate| < band over the final window.

        Args:
            states: (T, obs_dim, n) visited states
            band: Success band
            window: Final steps checked (defaults to all)
        """
        tail = states if window is None else states[-window:]
        return np.all(np.abs(tail[:, 0, :]) < band, axis=0)
