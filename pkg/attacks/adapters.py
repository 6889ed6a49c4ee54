#!/usr/bin/env python3
"""
Perturbation Adapters

Observation perturbations applied inside rollouts: sample delays, uniform
random noise, per-step PGD and fixed (precomputed) attack sequences.
"""

from typing import Any, Dict, List, Optional

import numpy as np

from attacks.attack_spec import AttackKind, AttackSpec, Norm
from attacks.pgd import pgd_step_attack
from autodiff.tensor import Tensor
from configuration import PGD_STEPS
from environments.environment import env_streams
from environments.rollout import NO_PERTURBATION, MeanFunction, PerturbationAdapter

# keeps noise streams apart from the environment streams of the same seed
NOISE_STREAM_OFFSET = 1_000_000


class DelayAdapter(PerturbationAdapter):
    """The policy sees x_{t-k}; before k samples have passed it sees x_0."""

    kind = "delay"

    def __init__(self, delay: int):
        if delay < 0:
            raise ValueError(f"delay must be >= 0 samples, got {delay}")
        self.delay = int(delay)
        self.history: List[Tensor] = []

    def reset(self, observation: Tensor, horizon: int) -> None:
        self.history = []

    def perturb(self, t: int, observation: Tensor, policy_mean: MeanFunction) -> Tensor:
        self.history.append(observation.copy())
        return self.history[max(0, t - self.delay)]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "delay": self.delay}


class UniformNoiseAdapter(PerturbationAdapter):
    """
    Fresh uniform noise every step.

    linf draws each component from U(-eps, eps); l2 draws uniformly from the
    eps-ball. Column i uses its own stream, so results do not depend on batch size.
    """

    kind = "uniform_noise"

    def __init__(self, epsilon: float, norm: Norm = Norm.LINF, seed: int = 0):
        if epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {epsilon}")
        self.epsilon = float(epsilon)
        self.norm = Norm.parse(norm)
        self.seed = seed
        self.rngs: List[np.random.Generator] = []

    def reset(self, observation: Tensor, horizon: int) -> None:
        self.rngs = env_streams(self.seed, observation.shape[1], NOISE_STREAM_OFFSET)

    def sample(self, dim: int) -> np.ndarray:
        """One (dim, n) noise draw."""
        if self.norm is Norm.LINF:
            columns = [rng.uniform(-self.epsilon, self.epsilon, size=dim) for rng in self.rngs]
        else:
            columns = []
            for rng in self.rngs:
                direction = rng.standard_normal(dim)
                radius = self.epsilon * rng.uniform() ** (1.0 / dim)
                columns.append(radius * direction / max(np.linalg.norm(direction), 1e-300))
        return np.array(columns, dtype=np.float64).T.reshape(dim, len(self.rngs))

    def perturb(self, t: int, observation: Tensor, policy_mean: MeanFunction) -> Tensor:
        if not self.rngs:
            self.reset(observation, 0)
        return observation + self.sample(observation.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "epsilon": self.epsilon, "norm": self.norm.value, "seed": self.seed}


class PGDAdapter(PerturbationAdapter):
    """Each observation is replaced by the per-step PGD maximizer of the output deviation."""

    kind = "pgd_step"

    def __init__(self, policy: Any, epsilon: float, norm: Norm = Norm.L2, steps: int = PGD_STEPS,
                 step_size: Optional[float] = None, seed: int = 0):
        if epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {epsilon}")
        self.policy = policy
        self.epsilon = float(epsilon)
        self.norm = Norm.parse(norm)
        self.steps = steps
        self.step_size = step_size
        self.seed = seed
        self.deviations: List[np.ndarray] = []

    def reset(self, observation: Tensor, horizon: int) -> None:
        self.deviations = []

    def perturb(self, t: int, observation: Tensor, policy_mean: MeanFunction) -> Tensor:
        result = pgd_step_attack(self.policy, observation, self.epsilon, self.norm, self.steps,
                                 self.step_size, seed=[self.seed, t])
        self.deviations.append(result.deviation)
        return observation + result.perturbation

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "epsilon": self.epsilon, "norm": self.norm.value, "steps": self.steps,
                "seed": self.seed}


class FixedSequenceAdapter(PerturbationAdapter):
    """Adds a precomputed (T, obs_dim, n) perturbation sequence."""

    kind = "fixed_sequence"

    def __init__(self, sequence: Any):
        self.sequence = np.asarray(sequence, dtype=np.float64)
        if self.sequence.ndim != 3:
            raise ValueError(f"sequence must be (T, obs_dim, n), got shape {self.sequence.shape}")

    def reset(self, observation: Tensor, horizon: int) -> None:
        if len(self.sequence) != horizon:
            raise ValueError(f"sequence length {len(self.sequence)} does not match the horizon {horizon}")
        if self.sequence.shape[1:] != observation.shape:
            raise ValueError(f"sequence steps have shape {self.sequence.shape[1:]}, observations {observation.shape}")

    def perturb(self, t: int, observation: Tensor, policy_mean: MeanFunction) -> Tensor:
        return observation + self.sequence[t]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "steps": len(self.sequence)}


def delay_adapter(k: int) -> PerturbationAdapter:
    """Sample delay of k steps; k = 0 is the identity."""
    return NO_PERTURBATION if k == 0 else DelayAdapter(k)


def uniform_noise_adapter(epsilon: float, norm: Norm = Norm.LINF, seed: int = 0) -> UniformNoiseAdapter:
    return UniformNoiseAdapter(epsilon, norm, seed)


def make_adapter(spec: AttackSpec, policy: Any) -> PerturbationAdapter:
    """Adapter of a rollout-level attack kind (trajectory attacks are solved separately)."""
    if spec.kind is AttackKind.NONE:
        return NO_PERTURBATION
    if spec.kind is AttackKind.DELAY:
        return delay_adapter(spec.delay)
    if spec.kind is AttackKind.UNIFORM_NOISE:
        return uniform_noise_adapter(spec.epsilon, spec.norm, spec.seed)
    if spec.kind is AttackKind.PGD_STEP:
        return PGDAdapter(policy, spec.epsilon, spec.norm, spec.steps, spec.step_size, spec.seed)
    raise ValueError(f"{spec.kind.value} attacks have no rollout adapter")

