#!/usr/bin/env python3
"""
Attack Runner

Evaluates a policy under any AttackSpec and returns a uniform AttackResult.
"""

from typing import Any

from attacks.adapters import PGDAdapter, make_adapter
from attacks.attack_spec import AttackKind, AttackResult, AttackSpec
from attacks.trajectory_attack import max_output_deviation, trajectory_attack
from configuration import PPO_EVAL_EPISODES
from environments.environment import Environment
from environments.rollout import evaluate_policy
from logger.log_wrapper import get_logger

logger = get_logger("attacks:runner", __name__)


def run_attack(policy: Any, env: Environment, spec: AttackSpec, episodes: int = PPO_EVAL_EPISODES,
               seed: int = 0) -> AttackResult:
    """
    Deterministic evaluation of `policy` under `spec` from the initial states drawn with `seed`.

    Args:
        policy: Gaussian head, PolicyNetwork or numpy/graph callable
        env: Environment
        spec: Attack setting
        episodes: Parallel evaluation episodes
        seed: Seed of the initial states (AttackSpec.seed drives noise and random starts)

    Returns:
        AttackResult with nominal and attacked mean rewards
    """
    if spec.kind is AttackKind.TRAJECTORY:
        return trajectory_attack(policy, env, spec.epsilon, spec.windows, spec.window_length, spec.iters,
                                 spec.step_size, seed=seed, episodes=episodes)

    nominal = evaluate_policy(policy, env, episodes=episodes, seed=seed)
    adapter = make_adapter(spec, policy)
    attacked = evaluate_policy(policy, env, episodes=episodes, seed=seed, adapter=adapter)
    iterations = spec.steps * env.horizon if isinstance(adapter, PGDAdapter) else 0
    result = AttackResult(
        spec=spec,
        perturbations=attacked.trajectory.perturbations,
        nominal_return=nominal.mean_reward,
        attacked_return=attacked.mean_reward,
        max_deviation=max_output_deviation(policy, attacked.trajectory),
        iterations=iterations,
        stabilized_fraction=attacked.stabilized_fraction,
        attacked_rewards=attacked.rewards,
        trajectory=attacked.trajectory,
        nominal_trajectory=nominal.trajectory,
    )
    logger.info(f"{spec.label} (budget {spec.budget:g}): reward {result.nominal_return:.2f} -> "
                f"{result.attacked_return:.2f}")
    return result
