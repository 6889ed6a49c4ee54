#!/usr/bin/env python3
"""
Test Trajectory Attack Module

Window optimization, feasibility, the no-worse-than-nominal guarantee and the
attack runner.
"""

import json
import os
import tempfile

import numpy as np
import pytest

from attacks.attack_runner import run_attack
from attacks.attack_spec import AttackKind, AttackSpec, Norm, per_step_norm_ok
from attacks.trajectory_attack import attack_window, trajectory_attack
from configuration import ATTACK_EPSILON, EVAL_SEED
from environments.double_integrator import DoubleIntegratorEnv, DoubleIntegratorParams
from environments.environment import env_streams
from environments.pendulum import PendulumEnv, PendulumParams
from environments.rollout import rollout
from layers.policy_network import build_policy
from ppo.config import PPOConfig
from ppo.trainer import train


@pytest.fixture
def env():
    return PendulumEnv(PendulumParams(horizon=20))


@pytest.fixture
def network():
    return build_policy("plain", widths=(8, 8), seed=0)


def _attack(network, env, epsilon, **kwargs):
    settings = dict(windows=2, window_length=10, iters=20, episodes=3, seed=1)
    settings.update(kwargs)
    return trajectory_attack(network, env, epsilon, **settings)


class TestTrajectoryAttack:
    """Test cases for trajectory_attack."""

    def test_zero_budget_equals_nominal(self, env, network):
        """Test that epsilon = 0 reproduces the nominal return exactly."""
        result = _attack(network, env, 0.0)

        assert result.attacked_return == result.nominal_return
        assert not result.perturbations.any()
        assert result.iterations == 0

    def test_never_above_nominal(self, env, network):
        """Test that no episode gains reward under attack."""
        result = _attack(network, env, 0.2)

        assert np.all(result.attacked_rewards <= result.nominal_trajectory.returns)
        assert result.attacked_return <= result.nominal_return

    def test_per_step_budget(self, env, network):
        """Test that every step's perturbation lies in the l2 ball."""
        result = _attack(network, env, 0.15)

        assert per_step_norm_ok(result.perturbations, 0.15, Norm.L2, 1e-9)
        assert result.perturbations.shape == (20, 2, 3)

    def test_lowers_quadratic_reward(self):
        """Test that the attack strictly lowers the reward of a double-integrator policy."""
        env = DoubleIntegratorEnv(DoubleIntegratorParams(horizon=20))
        network = build_policy("plain", widths=(8,), seed=4)

        result = trajectory_attack(network, env, 0.3, windows=2, window_length=10, iters=30, episodes=2, seed=0)

        assert result.attacked_return < result.nominal_return
        assert result.iterations == 60

    def test_horizon_must_split_into_windows(self, env, network):
        """Test that the horizon has to equal windows x window_length."""
        with pytest.raises(ValueError, match="windows x window_length"):
            _attack(network, env, 0.1, windows=4, window_length=10)

    def test_unoptimized_window_matches_rollout(self, env, network):
        """Test that a window with no gradient steps ends where the eager rollout ends."""
        x0 = env.reset(env_streams(0, 3))

        sequence, final_state, _ = attack_window(network, env, x0, 10, 0.2, 0, 0.004)

        replay = rollout(network, env, 10, initial_states=x0)
        assert not sequence.any()
        np.testing.assert_allclose(final_state, replay.final_states, atol=1e-12)

    def test_save(self, env, network):
        """Test the JSON dump and the trajectory CSV."""
        result = _attack(network, env, 0.1)

        with tempfile.TemporaryDirectory() as temp_dir:
            path = result.save(temp_dir)
            with open(path) as f:
                data = json.load(f)

            assert data["spec"]["kind"] == "trajectory"
            assert data["attacked_return"] == result.attacked_return
            assert len(data["per_step_norms"]) == 20
            assert os.path.exists(data["trajectory_csv"])

    @pytest.mark.slow
    def test_sandwich_survives_attack_that_breaks_plain(self):
        """Test at eps = 0.11 that a trained gamma = 4 sandwich policy stays up while a plain MLP falls."""
        env = PendulumEnv()
        stabilized = {}
        for architecture, gamma in (("plain", None), ("sandwich", 4.0)):
            outcomes = []
            for seed in range(3):
                policy = train(env, architecture, PPOConfig(seed=seed), gamma=gamma).policy
                result = trajectory_attack(policy, env, ATTACK_EPSILON, episodes=8, seed=EVAL_SEED)
                outcomes.append(result.stabilized_fraction >= 0.5)
            stabilized[architecture] = sum(outcomes)

        assert stabilized["sandwich"] >= 2
        assert stabilized["plain"] < 2


class TestRunAttack:
    """Test cases for run_attack."""

    def test_none_equals_nominal(self, env, network):
        """Test that the unperturbed kind reports identical returns."""
        result = run_attack(network, env, AttackSpec(kind="none"), episodes=4)

        assert result.attacked_return == result.nominal_return
        assert result.max_deviation == 0.0

    def test_delay(self, env, network):
        """Test that the delay kind evaluates from the same initial states."""
        result = run_attack(network, env, AttackSpec(kind="delay", delay=2), episodes=4)

        np.testing.assert_array_equal(result.trajectory.states[0], result.nominal_trajectory.states[0])
        assert result.spec.budget == 2.0

    def test_pgd_step_deviation_bound(self, env):
        """Test the certified deviation bound under a per-step l2 PGD attack."""
        policy = build_policy("sandwich", widths=(8, 8), gamma=4.0, seed=0)

        result = run_attack(policy, env, AttackSpec(kind="pgd_step", epsilon=0.11, steps=10), episodes=3)

        assert result.max_deviation <= 4.0 * 0.11 + 1e-6
        assert result.iterations == 10 * env.horizon
        assert per_step_norm_ok(result.perturbations, 0.11, Norm.L2, 1e-9)

    def test_uniform_noise_linf(self, env, network):
        """Test that linf uniform noise stays in its box."""
        spec = AttackSpec(kind=AttackKind.UNIFORM_NOISE, epsilon=0.05, norm="linf", seed=2)

        result = run_attack(network, env, spec, episodes=4)

        assert per_step_norm_ok(result.perturbations, 0.05, Norm.LINF, 1e-9)
        assert result.attacked_rewards.shape == (4,)

    def test_trajectory_dispatch(self, env, network):
        """Test that trajectory specs go to the trajectory solver."""
        spec = AttackSpec(kind="trajectory", epsilon=0.1, windows=2, window_length=10, iters=5)

        result = run_attack(network, env, spec, episodes=2)

        assert result.iterations == 10
        assert result.attacked_return <= result.nominal_return
