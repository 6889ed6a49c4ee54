#!/usr/bin/env python3
"""
Experiment Configuration

Typed JSON configurations of the CLI subcommands and of the (architecture, gamma,
seed) sweep. Every class validates itself on construction and round-trips
through from_dict/to_dict.
"""

import json
import math
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar

import numpy as np

from attacks.attack_spec import AttackKind, AttackSpec, Norm
from configuration import (
    ATTACK_EPSILON_GRID,
    CONTOUR_RESOLUTION,
    DELAY_GRID,
    EVAL_SEED,
    FAILURE_THRESHOLD,
    GAMMA_SWEEP,
    NUM_SEEDS,
    PPO_EVAL_EPISODES,
)
from environments.environment import Environment
from environments.registry import TASKS, make_environment
from estimation.lipschitz_estimator import EstimationSettings
from layers.policy_network import Architecture
from ppo.config import PPOConfig

T = TypeVar("T")

# Largest seed handed to numpy generators derived from the master seed
SEED_RANGE = 2 ** 31 - 1


def _check_keys(cls: type, data: Dict[str, Any], what: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"Unknown {what} settings: {', '.join(sorted(unknown))}")


def _check_task(task: str, env_params: Dict[str, Any]) -> None:
    if task not in TASKS:
        raise ValueError(f"Unknown task '{task}'. Available: {', '.join(TASKS)}")
    TASKS[task][1].from_dict(env_params)


def load_config(path: Optional[str], cls: Type[T], overrides: Optional[Dict[str, Any]] = None) -> T:
    """
    Read a JSON config file into `cls`, with top-level `overrides` applied.

    Without a path the defaults of `cls` are used.

    Raises:
        FileNotFoundError: Missing file
        ValueError: Malformed JSON or invalid settings
    """
    if path is None:
        return cls.from_dict(dict(overrides or {}))  # type: ignore[attr-defined]
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, 'r') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"Config {path} must hold a JSON object")
    return cls.from_dict({**data, **(overrides or {})})  # type: ignore[attr-defined]


@dataclass(frozen=True)
class AttackSweep:
    """An attack setting evaluated over an ascending budget grid."""
    spec: AttackSpec
    budgets: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        self._validate_budgets()

    def _validate_budgets(self) -> None:
        if not self.budgets:
            raise ValueError(f"{self.spec.label}: budget grid is empty")
        if any(b < 0 or not math.isfinite(b) for b in self.budgets):
            raise ValueError(f"{self.spec.label}: budgets must be finite and >= 0")
        if any(later <= earlier for earlier, later in zip(self.budgets, self.budgets[1:])):
            raise ValueError(f"{self.spec.label}: budget grid must be strictly ascending")
        if self.spec.kind is AttackKind.DELAY and any(b != int(b) for b in self.budgets):
            raise ValueError("delay budgets are whole samples")

    @property
    def label(self) -> str:
        return self.spec.label

    def specs(self) -> List[AttackSpec]:
        return [self.spec.with_budget(b) for b in self.budgets]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackSweep':
        data = dict(data)
        kind = AttackKind.parse(data.get("kind", "none"))
        default = DELAY_GRID if kind is AttackKind.DELAY else ATTACK_EPSILON_GRID
        budgets = data.pop("budgets", default)
        return cls(spec=AttackSpec.from_dict(data), budgets=tuple(budgets))

    def to_dict(self) -> Dict[str, Any]:
        data = self.spec.to_dict()
        data.pop("delay" if self.spec.kind is AttackKind.DELAY else "epsilon")
        data["budgets"] = list(self.budgets)
        return data


def default_attacks() -> Tuple[AttackSweep, ...]:
    """Delay grid plus the uniform, l2/linf PGD and trajectory columns."""
    return (
        AttackSweep(AttackSpec(kind=AttackKind.DELAY), DELAY_GRID),
        AttackSweep(AttackSpec(kind=AttackKind.UNIFORM_NOISE, norm=Norm.LINF), ATTACK_EPSILON_GRID),
        AttackSweep(AttackSpec(kind=AttackKind.PGD_STEP, norm=Norm.L2), ATTACK_EPSILON_GRID),
        AttackSweep(AttackSpec(kind=AttackKind.PGD_STEP, norm=Norm.LINF), ATTACK_EPSILON_GRID),
        AttackSweep(AttackSpec(kind=AttackKind.TRAJECTORY, norm=Norm.L2), ATTACK_EPSILON_GRID),
    )


@dataclass(frozen=True)
class Cell:
    """One trained policy of the sweep."""
    architecture: Architecture
    gamma: Optional[float]
    seed: int

    @property
    def group(self) -> str:
        """(architecture, gamma) key shared by all seeds."""
        if self.gamma is None:
            return self.architecture.value
        return f"{self.architecture.value}_g{self.gamma:g}"

    @property
    def cell_id(self) -> str:
        return f"{self.group}_s{self.seed}"

    def to_dict(self) -> Dict[str, Any]:
        return {"architecture": self.architecture.value, "gamma": self.gamma, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Cell':
        gamma = data.get("gamma")
        return cls(Architecture.parse(data["architecture"]), None if gamma is None else float(gamma),
                   int(data["seed"]))


@dataclass
class ExperimentConfig:
    """
    A full sweep: every (architecture, gamma) group trained over all seeds.

    Attributes:
        name: Free-form experiment name
        task: Environment task name
        env_params: Overrides of the task constants
        architectures: Architectures to train; plain runs once per seed, the others once per gamma
        gammas: Lipschitz budgets of the constrained architectures
        widths: Optional hidden widths per architecture name
        seed: Master seed the training seeds are derived from
        num_seeds: Number of training seeds
        seeds: Explicit training seeds (derived from `seed` when omitted)
        ppo: PPOConfig overrides (the seed is set per cell)
        attacks: Attack sweeps evaluated on every trained policy
        estimation: Empirical Lipschitz settings
        eval_episodes: Evaluation episodes per (policy, perturbation)
        eval_seed: Seed of the shared evaluation initial states
        failure_threshold: Mean reward below which a policy counts as beaten
        contour_resolution: Points per axis of the action contour report
        local_grid: Compute the local Lipschitz map of every policy
        output_dir: Artifact directory (the CLI --out flag takes precedence)
    """
    name: str = "liprl"
    task: str = "pendulum"
    env_params: Dict[str, Any] = field(default_factory=dict)
    architectures: Tuple[str, ...] = ("plain", "sandwich")
    gammas: Tuple[float, ...] = GAMMA_SWEEP
    widths: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    seed: int = 0
    num_seeds: int = NUM_SEEDS
    seeds: Optional[Tuple[int, ...]] = None
    ppo: Dict[str, Any] = field(default_factory=dict)
    attacks: Tuple[AttackSweep, ...] = field(default_factory=default_attacks)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    eval_episodes: int = PPO_EVAL_EPISODES
    eval_seed: int = EVAL_SEED
    failure_threshold: float = FAILURE_THRESHOLD
    contour_resolution: int = CONTOUR_RESOLUTION
    local_grid: bool = True
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.architectures = tuple(Architecture.parse(a).value for a in self.architectures)
        self.gammas = tuple(float(g) for g in self.gammas)
        self.widths = {Architecture.parse(a).value: tuple(int(w) for w in ws) for a, ws in self.widths.items()}
        if self.seeds is not None:
            self.seeds = tuple(int(s) for s in self.seeds)
        self._validate_grid()
        self._validate_evaluation()
        self.ppo_config(0)

    def _validate_grid(self) -> None:
        _check_task(self.task, self.env_params)
        if not self.architectures:
            raise ValueError("at least one architecture is required")
        if len(set(self.architectures)) != len(self.architectures):
            raise ValueError("architectures must be distinct")
        constrained = [a for a in self.architectures if Architecture(a).constrained]
        if constrained and not self.gammas:
            raise ValueError(f"{', '.join(constrained)} need at least one gamma")
        if any(g <= 0 or not math.isfinite(g) for g in self.gammas):
            raise ValueError("gammas must be finite and positive")
        if len(set(self.gammas)) != len(self.gammas):
            raise ValueError("gammas must be distinct")
        if self.seeds is not None:
            if len(set(self.seeds)) != len(self.seeds):
                raise ValueError(f"seeds must be distinct, got {list(self.seeds)}")
            if not self.seeds:
                raise ValueError("seeds must not be empty")
        elif self.num_seeds < 1:
            raise ValueError(f"num_seeds must be >= 1, got {self.num_seeds}")
        if len({sweep.label for sweep in self.attacks}) != len(self.attacks):
            raise ValueError("attack sweeps must have distinct labels")
        if any(sweep.spec.kind is AttackKind.NONE for sweep in self.attacks):
            raise ValueError("the unperturbed evaluation is always run; remove the 'none' attack sweep")

    def _validate_evaluation(self) -> None:
        if self.eval_episodes < 2:
            raise ValueError(f"eval_episodes must be >= 2, got {self.eval_episodes}")
        if not math.isfinite(self.failure_threshold):
            raise ValueError("failure_threshold must be finite")
        if self.contour_resolution < 2:
            raise ValueError(f"contour_resolution must be >= 2, got {self.contour_resolution}")

    def training_seeds(self) -> Tuple[int, ...]:
        """Explicit seeds, or num_seeds distinct seeds fanned out from the master seed."""
        if self.seeds is not None:
            return self.seeds
        rng = np.random.default_rng(self.seed)
        return tuple(int(s) for s in rng.choice(SEED_RANGE, size=self.num_seeds, replace=False))

    def cells(self) -> List[Cell]:
        """All cells in group order, seeds innermost."""
        cells = []
        for name in self.architectures:
            architecture = Architecture(name)
            gammas = self.gammas if architecture.constrained else (None,)
            for gamma in gammas:
                cells.extend(Cell(architecture, gamma, seed) for seed in self.training_seeds())
        return cells

    def groups(self) -> List[str]:
        return list(dict.fromkeys(cell.group for cell in self.cells()))

    def environment(self) -> Environment:
        return make_environment(self.task, self.env_params)

    def ppo_config(self, seed: int) -> PPOConfig:
        return PPOConfig.from_dict({**self.ppo, "seed": seed})

    def widths_for(self, architecture: Architecture) -> Optional[Tuple[int, ...]]:
        return self.widths.get(architecture.value)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        _check_keys(cls, data, "experiment")
        data = dict(data)
        if "attacks" in data:
            data["attacks"] = tuple(AttackSweep.from_dict(sweep) for sweep in data["attacks"])
        if "estimation" in data:
            data["estimation"] = EstimationSettings.from_dict(data["estimation"])
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "task": self.task,
            "env_params": dict(self.env_params),
            "architectures": list(self.architectures),
            "gammas": list(self.gammas),
            "widths": {a: list(ws) for a, ws in self.widths.items()},
            "seed": self.seed,
            "num_seeds": self.num_seeds,
            "seeds": list(self.training_seeds()),
            "ppo": dict(self.ppo),
            "attacks": [sweep.to_dict() for sweep in self.attacks],
            "estimation": self.estimation.to_dict(),
            "eval_episodes": self.eval_episodes,
            "eval_seed": self.eval_seed,
            "failure_threshold": self.failure_threshold,
            "contour_resolution": self.contour_resolution,
            "local_grid": self.local_grid,
            "output_dir": self.output_dir,
        }


@dataclass
class TrainSettings:
    """Configuration of the `train` subcommand."""
    task: str = "pendulum"
    env_params: Dict[str, Any] = field(default_factory=dict)
    architecture: str = "sandwich"
    gamma: Optional[float] = 4.0
    widths: Optional[Tuple[int, ...]] = None
    ppo: Dict[str, Any] = field(default_factory=dict)
    keep_checkpoints: bool = True

    def __post_init__(self):
        self.architecture = Architecture.parse(self.architecture).value
        if not Architecture(self.architecture).constrained:
            self.gamma = None
        elif self.gamma is None or self.gamma <= 0:
            raise ValueError(f"{self.architecture} needs a positive gamma")
        _check_task(self.task, self.env_params)
        self.ppo_config()

    def ppo_config(self, seed: Optional[int] = None) -> PPOConfig:
        return PPOConfig.from_dict(self.ppo if seed is None else {**self.ppo, "seed": seed})

    def environment(self) -> Environment:
        return make_environment(self.task, self.env_params)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainSettings':
        _check_keys(cls, data, "train")
        return cls(**data)


@dataclass
class AttackSettings:
    """Configuration of the `attack` subcommand."""
    attack: AttackSpec
    checkpoint: Optional[str] = None
    task: str = "pendulum"
    env_params: Dict[str, Any] = field(default_factory=dict)
    episodes: int = PPO_EVAL_EPISODES
    eval_seed: int = EVAL_SEED

    def __post_init__(self):
        if isinstance(self.attack, dict):
            self.attack = AttackSpec.from_dict(self.attack)
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")
        _check_task(self.task, self.env_params)

    def environment(self) -> Environment:
        return make_environment(self.task, self.env_params)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackSettings':
        _check_keys(cls, data, "attack")
        if "attack" not in data:
            raise ValueError("attack settings need an 'attack' object")
        return cls(**data)


@dataclass
class LipschitzSettings:
    """Configuration of the `lipschitz` subcommand."""
    checkpoint: Optional[str] = None
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    local_grid: bool = True
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.estimation, dict):
            self.estimation = EstimationSettings.from_dict(self.estimation)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LipschitzSettings':
        _check_keys(cls, data, "lipschitz")
        return cls(**data)
