#!/usr/bin/env python3
"""
PPO Trainer

Alternates stochastic rollout collection and minibatch PPO epochs with Adam
and gradient-norm clipping, evaluates the mean policy periodically, streams
metrics and writes checkpoints.
"""

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.errors import DivergedPolicyError
from autodiff.graph import backward
from configuration import EVAL_SEED, VALUE_HIDDEN_WIDTHS
from environments.environment import Environment
from environments.rollout import EvaluationResult, Trajectory, evaluate_policy, rollout
from layers.checkpoint import Checkpoint, save_checkpoint
from layers.policy_network import PolicyNetwork, build_policy, certified_upper_bound
from logger.log_wrapper import get_logger
from metrics.metrics_tracker import MetricsTracker, UpdateMetrics
from ppo.config import PPOConfig
from ppo.gaussian_policy import LOG_STD_KEY, GaussianPolicy
from ppo.optimizer import Adam, clip_grad_norm
from ppo.ppo_loss import ppo_loss
from ppo.rollout_buffer import RolloutBatch, build_batch

logger = get_logger("ppo:trainer", __name__)

VALUE_SEED_OFFSET = 7919
DIAGNOSTIC_CHECKPOINT = "diagnostic.json"
FINAL_CHECKPOINT = "policy.json"


def build_value_network(env: Environment, seed: int, widths: Sequence[int] = VALUE_HIDDEN_WIDTHS) -> PolicyNetwork:
    """Plain tanh MLP critic, whatever the policy architecture."""
    return build_policy("plain", widths=widths, seed=seed + VALUE_SEED_OFFSET, input_dim=env.obs_dim, output_dim=1)


@dataclass
class TrainingResult:
    """
    Outcome of a training run.

    Attributes:
        policy: Final Gaussian policy
        value_network: Final critic
        final_eval: Deterministic evaluation of the final mean policy
        checkpoints: Checkpoint files written, in order
        metrics: Per-update metrics
    """
    policy: GaussianPolicy
    value_network: PolicyNetwork
    final_eval: EvaluationResult
    checkpoints: List[str] = field(default_factory=list)
    metrics: List[UpdateMetrics] = field(default_factory=list)


class PPOTrainer:
    """PPO on one environment for one policy architecture."""

    def __init__(self, env: Environment, network: PolicyNetwork, config: PPOConfig, run_dir: Optional[str] = None,
                 value_network: Optional[PolicyNetwork] = None, keep_checkpoints: bool = True,
                 eval_seed: int = EVAL_SEED):
        """
        Initialize the trainer.

        Args:
            env: Training environment
            network: Initial mean network (its architecture is kept)
            config: PPO hyperparameters
            run_dir: Directory for metrics and checkpoints (nothing is written when None)
            value_network: Initial critic (a fresh plain MLP by default)
            keep_checkpoints: Write periodic checkpoints besides the final one
            eval_seed: Seed of the deterministic evaluation episodes
        """
        self.env = env
        self.config = config
        self.run_dir = run_dir
        self.keep_checkpoints = keep_checkpoints
        self.eval_seed = eval_seed
        self.policy = GaussianPolicy.create(network, config.initial_log_std)
        self.value_network = value_network or build_value_network(env, config.seed)
        self.policy_optimizer = Adam(lr=config.policy_lr)
        self.value_optimizer = Adam(lr=config.value_lr)
        self.tracker = MetricsTracker(run_dir) if run_dir else None
        self.checkpoints: List[str] = []
        self.history: List[UpdateMetrics] = []
        self.update_index = 0

    # --- rollouts -------------------------------------------------------------

    def collect(self, update: int) -> Tuple[Trajectory, RolloutBatch]:
        """Stochastic rollout of the current policy; streams never repeat across updates."""
        config = self.config
        trajectory = rollout(self.policy, self.env, horizon=config.rollout_length, seed=config.seed,
                             deterministic=False, num_envs=config.num_envs,
                             discount=config.discount, stream_offset=update * config.num_envs)
        batch = build_batch(trajectory, self.value_network.compiled(), config.discount, config.gae_lambda)
        return trajectory, batch

    def evaluate(self) -> EvaluationResult:
        return evaluate_policy(self.policy, self.env, episodes=self.config.eval_episodes, seed=self.eval_seed)

    # --- optimization -----------------------------------------------------------

    def optimize(self, batch: RolloutBatch, update: int) -> Dict[str, float]:
        """Run the configured epochs of minibatch steps; returns mean loss components and norms."""
        config = self.config
        rng = np.random.default_rng([config.seed, update])
        totals: Dict[str, List[float]] = {}
        for _ in range(config.epochs):
            for index in batch.minibatches(config.minibatch_size, rng):
                for name, value in self.step(batch.select(index)).items():
                    totals.setdefault(name, []).append(value)
        return {name: float(np.mean(values)) for name, values in totals.items()}

    def step(self, minibatch: RolloutBatch) -> Dict[str, float]:
        """One Adam step on the policy and one on the critic."""
        config = self.config
        loss = ppo_loss(self.policy, self.value_network, minibatch, config.clip_range,
                        config.value_coef, config.entropy_coef)
        names = list(loss.policy_inputs.values()) + list(loss.value_inputs.values())
        grads = backward(loss.graph, loss.total, wrt=names)
        policy_grads = {name: grads[input_name] for name, input_name in loss.policy_inputs.items()}
        value_grads = {name: grads[input_name] for name, input_name in loss.value_inputs.items()}
        if not all(np.all(np.isfinite(g)) for g in list(policy_grads.values()) + list(value_grads.values())):
            raise DivergedPolicyError("non-finite PPO gradient")

        policy_grads, grad_norm = clip_grad_norm(policy_grads, config.max_grad_norm)
        value_grads, value_grad_norm = clip_grad_norm(value_grads, config.max_grad_norm)
        self.policy = self.policy.with_parameters(self.policy_optimizer.step(self.policy.parameters(), policy_grads))
        self.value_network = self.value_network.with_parameters(
            self.value_optimizer.step(self.value_network.parameters(), value_grads))

        result = loss.values()
        result["grad_norm"] = grad_norm
        result["value_grad_norm"] = value_grad_norm
        return result

    # --- checkpoints -------------------------------------------------------------

    def checkpoint(self, filename: str, metadata: Optional[Dict[str, Any]] = None) -> Optional[str]:
        if not self.run_dir:
            return None
        document = {"update": self.update_index, "config": self.config.to_dict(), "env": self.env.to_dict(),
                    "certified_bound": certified_upper_bound(self.policy.network)}
        document.update(metadata or {})
        path = save_checkpoint(os.path.join(self.run_dir, filename),
                               Checkpoint(self.policy.network, seed=self.config.seed, metadata=document,
                                          tensors={LOG_STD_KEY: self.policy.log_std},
                                          value_network=self.value_network))
        self.checkpoints.append(path)
        return path

    # --- main loop ---------------------------------------------------------------

    def train(self) -> TrainingResult:
        """
        Run all updates.

        Raises:
            DivergedPolicyError: NaN loss or gradient (a diagnostic checkpoint is written first)
        """
        config = self.config
        if self.tracker:
            self.tracker.start_run(f"{self.policy.network.architecture.value} on {self.env.name}")
        logger.info(f"Training {self.policy.network.architecture.value} policy "
                    f"({self.policy.network.parameter_count()} parameters) for {config.num_updates} updates")
        final_eval: Optional[EvaluationResult] = None
        try:
            for update in range(config.num_updates):
                self.update_index = update
                trajectory, batch = self.collect(update)
                losses = self.optimize(batch, update)
                last = update == config.num_updates - 1
                evaluation = self.evaluate() if last or (update + 1) % config.eval_interval == 0 else None
                if last:
                    final_eval = evaluation
                self._record(update, trajectory, losses, evaluation)
                if self.keep_checkpoints and not last and (update + 1) % config.checkpoint_interval == 0:
                    self.checkpoint(os.path.join("checkpoints", f"update_{update + 1:05d}.json"))
        except DivergedPolicyError as e:
            logger.error(f"Policy diverged at update {self.update_index}: {e}")
            self.checkpoint(DIAGNOSTIC_CHECKPOINT, {"error": str(e)})
            if self.tracker:
                self.tracker.complete_run(False, str(e))
                self.tracker.save_summary()
            raise

        self.checkpoint(FINAL_CHECKPOINT, {"final_eval": final_eval.to_dict()})
        if self.tracker:
            self.tracker.complete_run(True)
            self.tracker.save_summary()
        logger.info(f"Finished training: eval reward {final_eval.mean_reward:.2f}, "
                    f"stabilized {final_eval.stabilized_fraction:.0%}")
        return TrainingResult(policy=self.policy, value_network=self.value_network, final_eval=final_eval,
                              checkpoints=list(self.checkpoints), metrics=list(self.history))

    def _record(self, update: int, trajectory: Trajectory, losses: Dict[str, float],
                evaluation: Optional[EvaluationResult]) -> None:
        metrics = UpdateMetrics(
            update=update,
            step=(update + 1) * self.config.batch_size,
            mean_reward=float(trajectory.returns.mean()),
            policy_loss=losses["policy"],
            value_loss=losses["value"],
            entropy=losses["entropy"],
            approx_kl=losses["approx_kl"],
            clip_fraction=losses["clip_fraction"],
            grad_norm=losses["grad_norm"],
            value_grad_norm=losses["value_grad_norm"],
            eval_reward=None if evaluation is None else evaluation.mean_reward,
            eval_stabilized=None if evaluation is None else evaluation.stabilized_fraction,
        )
        self.history.append(metrics)
        if self.tracker:
            self.tracker.record_update(metrics)
        if evaluation is not None:
            logger.info(f"Update {update + 1}/{self.config.num_updates}: rollout reward {metrics.mean_reward:.2f}, "
                        f"eval reward {evaluation.mean_reward:.2f}")
        else:
            logger.debug(f"Update {update + 1}/{self.config.num_updates}: rollout reward {metrics.mean_reward:.2f}")


def train(env: Environment, architecture: Any, config: PPOConfig, gamma: Optional[float] = None,
          widths: Optional[Sequence[int]] = None, run_dir: Optional[str] = None,
          keep_checkpoints: bool = True) -> TrainingResult:
    """
    Train a policy of the given architecture with PPO.

    Args:
        env: Environment
        architecture: plain, sn, aol, cayley or sandwich
        config: PPO hyperparameters (config.seed initializes the networks)
        gamma: Lipschitz budget of constrained architectures
        widths: Hidden widths (architecture default when omitted)
        run_dir: Output directory for metrics.jsonl, checkpoints and the final policy.json
        keep_checkpoints: Write periodic checkpoints

    Returns:
        TrainingResult
    """
    network = build_policy(architecture, widths=widths, gamma=gamma, seed=config.seed,
                           input_dim=env.obs_dim, output_dim=env.action_dim)
    return PPOTrainer(env, network, config, run_dir=run_dir, keep_checkpoints=keep_checkpoints).train()
