#!/usr/bin/env python3
"""
Rollouts

Closed-loop simulation of a policy on column batches of environments. The
eager path collects trajectories for training and evaluation; the recorded
path builds a graph whose return is differentiable wrt a sequence of
observation perturbations.
"""

import os
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autodiff.graph import Graph
from autodiff.ops import Ops
from autodiff.tensor import Tensor, as_tensor
from configuration import PPO_DISCOUNT, PPO_EVAL_EPISODES, STABILIZED_ANGLE, STABILIZED_WINDOW_SECONDS
from environments.environment import Environment, env_streams
from layers.policy_network import PolicyNetwork
from logger.log_wrapper import get_logger

logger = get_logger("environments:rollout", __name__)

MeanFunction = Callable[[Tensor], Tensor]
GraphPolicy = Callable[[Ops, Any], Any]


class PerturbationAdapter:
    """Maps the true observation at step t to the observation the policy receives."""

    kind: ClassVar[str] = "none"

    def reset(self, observation: Tensor, horizon: int) -> None:
        """Start a new batch of episodes from `observation` (obs_dim, n)."""

    def perturb(self, t: int, observation: Tensor, policy_mean: MeanFunction) -> Tensor:
        return observation

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind}


NO_PERTURBATION = PerturbationAdapter()


@dataclass
class Trajectory:
    """
    Time-indexed record of a batch of episodes.

    Attributes:
        states: (T, obs_dim, n) true states
        observations: (T, obs_dim, n) observations fed to the policy
        actions: (T, action_dim, n) applied (clipped) actions
        raw_actions: (T, action_dim, n) policy outputs before clipping
        rewards: (T, n) per-step rewards of (state, applied action)
        perturbations: (T, obs_dim, n) observation minus state
        final_states: (obs_dim, n) states after the last step
        log_probs: (T, n) log-probabilities of sampled actions, if stochastic
        discount: Discount factor of `discounted_returns`
        dt: Seconds per step
        state_labels: Names of the state coordinates
    """
    states: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    raw_actions: np.ndarray
    rewards: np.ndarray
    perturbations: np.ndarray
    final_states: np.ndarray
    log_probs: Optional[np.ndarray] = None
    discount: float = PPO_DISCOUNT
    dt: float = 1.0
    state_labels: Tuple[str, ...] = ("alpha", "alpha_dot")

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_envs(self) -> int:
        return self.rewards.shape[1]

    @property
    def returns(self) -> np.ndarray:
        """Undiscounted episode reward per environment."""
        return self.rewards.sum(axis=0)

    @property
    def discounted_returns(self) -> np.ndarray:
        weights = self.discount ** np.arange(self.horizon)
        return weights @ self.rewards

    def frame(self, env_index: int = 0) -> pd.DataFrame:
        """One episode as a table: t, state labels, u, reward, v1..vd."""
        data: Dict[str, Any] = {"t": np.arange(self.horizon) * self.dt}
        for i, label in enumerate(self.state_labels):
            data[label] = self.states[:, i, env_index]
        for i in range(self.actions.shape[1]):
            data["u" if i == 0 else f"u{i + 1}"] = self.actions[:, i, env_index]
        data["reward"] = self.rewards[:, env_index]
        for i in range(self.perturbations.shape[1]):
            data[f"v{i + 1}"] = self.perturbations[:, i, env_index]
        return pd.DataFrame(data)

    def save_csv(self, path: str, env_index: int = 0) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self.frame(env_index).to_csv(path, index=False)
        logger.debug(f"Wrote trajectory of environment {env_index} to {path}")
        return path


def mean_function(policy: Any) -> MeanFunction:
    """Deterministic action function of a policy (Gaussian head, network or callable)."""
    if hasattr(policy, "mean_action"):
        return policy.mean_action
    if isinstance(policy, PolicyNetwork):
        return policy.compiled()
    if callable(policy):
        return lambda x: as_tensor(policy(x))
    raise TypeError(f"Cannot act with {type(policy).__name__}")


def graph_policy(policy: Any) -> GraphPolicy:
    """(ops, observation) -> mean action with frozen parameters."""
    network = getattr(policy, "network", policy)
    if isinstance(network, PolicyNetwork):
        return lambda ops, x: network.forward(ops, x)
    if callable(policy):
        return policy
    raise TypeError(f"Cannot record {type(policy).__name__} on a graph")


def rollout(policy: Any, env: Environment, horizon: Optional[int] = None, seed: int = 0,
            adapter: Optional[PerturbationAdapter] = None, deterministic: bool = True, num_envs: int = 1,
            initial_states: Optional[Tensor] = None, discount: float = PPO_DISCOUNT,
            stream_offset: int = 0) -> Trajectory:
    """
    Simulate `num_envs` closed-loop episodes as matrix columns.

    Output is bit-identical only for the same seed and the same batch shape;
    across batch widths columns agree up to matmul rounding.

    Args:
        policy: Gaussian policy head, PolicyNetwork or numpy callable of (obs_dim, n) batches
        env: Environment
        horizon: Steps (the environment horizon by default)
        seed: Master seed; column i draws from the stream (seed, stream_offset + i)
        adapter: Observation perturbation (none by default)
        deterministic: Act with the mean action; stochastic mode needs `sample_action`
        num_envs: Parallel episodes (ignored when initial_states is given)
        initial_states: Optional (obs_dim, n) start states
        discount: Discount of the stored returns
        stream_offset: First stream index, for splitting one batch into chunks

    Returns:
        Trajectory of the batch
    """
    horizon = horizon or env.horizon
    adapter = adapter or NO_PERTURBATION
    if initial_states is not None:
        num_envs = as_tensor(initial_states).shape[1]
    rngs = env_streams(seed, num_envs, stream_offset)
    states = env.reset(rngs) if initial_states is None else as_tensor(initial_states).copy()
    mean = mean_function(policy)
    if not deterministic and not hasattr(policy, "sample_action"):
        raise ValueError(f"Stochastic rollouts need a policy with sample_action, got {type(policy).__name__}")
    adapter.reset(env.observe(states), horizon)

    obs_dim, action_dim = env.obs_dim, env.action_dim
    record = {
        "states": np.empty((horizon, obs_dim, num_envs)),
        "observations": np.empty((horizon, obs_dim, num_envs)),
        "actions": np.empty((horizon, action_dim, num_envs)),
        "raw_actions": np.empty((horizon, action_dim, num_envs)),
        "rewards": np.empty((horizon, num_envs)),
    }
    log_probs = None if deterministic else np.empty((horizon, num_envs))

    for t in range(horizon):
        observation = env.observe(states)
        perceived = adapter.perturb(t, observation, mean)
        if deterministic:
            raw = mean(perceived)
        else:
            raw, log_prob = policy.sample_action(perceived, rngs)
            log_probs[t] = log_prob.ravel()
        applied = env.clip_action(raw)
        record["states"][t] = states
        record["observations"][t] = perceived
        record["actions"][t] = applied
        record["raw_actions"][t] = raw
        record["rewards"][t] = env.reward(states, applied).ravel()
        states = env.step(states, applied, env.sample_noise(rngs))

    return Trajectory(perturbations=record["observations"] - record["states"], final_states=states,
                      log_probs=log_probs, discount=discount, dt=env.dt, state_labels=env.state_labels, **record)


@dataclass
class RecordedRollout:
    """Handles of a rollout recorded on a graph."""
    states: List[Any]
    actions: List[Any]
    rewards: List[Any]
    total: Any
    final_state: Any


def record_rollout(ops: Ops, env: Environment, policy: GraphPolicy, x0: Any, perturbations: Sequence[Any],
                   discount: float = PPO_DISCOUNT, start_step: int = 0, noise: Optional[Sequence[Any]] = None) -> RecordedRollout:
    """
    Record len(perturbations) closed-loop steps with observation x_t + v_t.

    The total is sum_t discount^(start_step + t) r_t over steps and columns, a (1, 1) handle.
    """
    states, actions, rewards = [], [], []
    state = x0
    total = None
    for t, v in enumerate(perturbations):
        action = env.clip_action(policy(ops, ops.add(env.observe(state), v)), ops)
        r = env.reward(state, action, ops)
        weighted = ops.scale(ops.sum(r), discount ** (start_step + t))
        total = weighted if total is None else ops.add(total, weighted)
        states.append(state)
        actions.append(action)
        rewards.append(r)
        state = env.step(state, action, None if noise is None else noise[t], ops)
    return RecordedRollout(states=states, actions=actions, rewards=rewards, total=total, final_state=state)


def perturbation_names(steps: int) -> List[str]:
    return [f"v{t}" for t in range(steps)]


def attack_graph(policy: Any, env: Environment, x0: Tensor, sequence: np.ndarray,
                 discount: float = PPO_DISCOUNT, start_step: int = 0) -> Tuple[Graph, RecordedRollout]:
    """
    Graph of the discounted return as a function of perturbation inputs v0..v{L-1}.

    Args:
        policy: Policy evaluated with frozen parameters
        env: Environment
        x0: (obs_dim, n) start states
        sequence: (L, obs_dim, n) initial perturbation values
        discount: Discount factor
        start_step: Absolute time index of the first recorded step
    """
    graph = Graph()
    handles = [graph.input(name, sequence[t]) for t, name in enumerate(perturbation_names(len(sequence)))]
    recorded = record_rollout(graph, env, graph_policy(policy), graph.constant(x0), handles, discount, start_step)
    graph.output("return", recorded.total)
    graph.output("final_state", recorded.final_state)
    return graph, recorded


@dataclass
class EvaluationResult:
    """
    Deterministic evaluation of a policy under one perturbation.

    Attributes:
        mean_reward: Mean undiscounted episode reward
        std_reward: Sample std (n - 1) of the episode rewards
        mean_discounted: Mean discounted return
        stabilized_fraction: Share of episodes inside the success band over the final window
        rewards: Undiscounted reward per episode
        trajectory: The simulated batch
    """
    mean_reward: float
    std_reward: float
    mean_discounted: float
    stabilized_fraction: float
    rewards: np.ndarray = field(repr=False)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def episodes(self) -> int:
        return int(self.rewards.size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_reward": self.mean_reward,
            "std_reward": self.std_reward,
            "mean_discounted": self.mean_discounted,
            "stabilized_fraction": self.stabilized_fraction,
            "episodes": self.episodes,
        }


def summarize(trajectory: Trajectory, env: Environment, band: float = STABILIZED_ANGLE,
              window_seconds: float = STABILIZED_WINDOW_SECONDS) -> EvaluationResult:
    rewards = trajectory.returns
    window = max(1, int(round(window_seconds / env.dt)))
    stabilized = env.stabilized(trajectory.states, band, window)
    return EvaluationResult(
        mean_reward=float(rewards.mean()),
        std_reward=float(rewards.std(ddof=1)) if rewards.size > 1 else 0.0,
        mean_discounted=float(trajectory.discounted_returns.mean()),
        stabilized_fraction=float(stabilized.mean()),
        rewards=rewards,
        trajectory=trajectory,
    )


def evaluate_policy(policy: Any, env: Environment, episodes: int = PPO_EVAL_EPISODES, seed: int = 0,
                    adapter: Optional[PerturbationAdapter] = None, band: float = STABILIZED_ANGLE,
                    window_seconds: float = STABILIZED_WINDOW_SECONDS) -> EvaluationResult:
    """Deterministic (mean-action) evaluation over `episodes` parallel episodes."""
    trajectory = rollout(policy, env, seed=seed, adapter=adapter, deterministic=True, num_envs=episodes)
    result = summarize(trajectory, env, band, window_seconds)
    logger.debug(f"Evaluated {episodes} episodes under '{(adapter or NO_PERTURBATION).kind}': "
                 f"mean reward {result.mean_reward:.2f}")
    return result
