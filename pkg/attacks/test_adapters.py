#!/usr/bin/env python3
"""
Test Adapters Module

Delays, uniform noise, per-step PGD and fixed sequences inside rollouts.
"""

import numpy as np
import pytest

from attacks.adapters import (
    DelayAdapter,
    FixedSequenceAdapter,
    PGDAdapter,
    delay_adapter,
    make_adapter,
    uniform_noise_adapter,
)
from attacks.attack_spec import AttackKind, AttackSpec, Norm
from environments.pendulum import PendulumEnv, PendulumParams
from environments.rollout import NO_PERTURBATION, rollout
from layers.policy_network import build_policy


@pytest.fixture
def env():
    return PendulumEnv(PendulumParams(horizon=20))


@pytest.fixture
def network():
    return build_policy("plain", widths=(8, 8), seed=0)


class TestDelayAdapter:
    """Test cases for sample delays."""

    def test_zero_delay_is_identity(self):
        """Test that k = 0 returns the unperturbed adapter."""
        assert delay_adapter(0) is NO_PERTURBATION

    def test_prefill_with_first_observation(self):
        """Test that x_0 is repeated until k samples have passed."""
        adapter = DelayAdapter(2)
        observations = [np.full((2, 1), float(t)) for t in range(5)]
        adapter.reset(observations[0], 5)

        seen = [adapter.perturb(t, x, None)[0, 0] for t, x in enumerate(observations)]

        assert seen == [0.0, 0.0, 0.0, 1.0, 2.0]

    def test_two_samples_is_a_tenth_of_a_second(self, env):
        """Test that a 2-sample delay at the pendulum rate is 0.1 s."""
        assert 2 * env.dt == pytest.approx(0.1)

    def test_delayed_rollout(self, env, network):
        """Test that the policy sees the state from k steps earlier."""
        trajectory = rollout(network, env, seed=0, num_envs=3, adapter=delay_adapter(3))

        np.testing.assert_array_equal(trajectory.observations[3:], trajectory.states[:-3])
        for t in range(3):
            np.testing.assert_array_equal(trajectory.observations[t], trajectory.states[0])

    def test_negative_delay_rejected(self):
        """Test that a negative delay is rejected."""
        with pytest.raises(ValueError, match="delay"):
            DelayAdapter(-1)


class TestUniformNoiseAdapter:
    """Test cases for uniform random noise."""

    def test_zero_budget(self, env, network):
        """Test that epsilon = 0 leaves observations untouched."""
        trajectory = rollout(network, env, seed=0, num_envs=2, adapter=uniform_noise_adapter(0.0))

        assert not trajectory.perturbations.any()

    def test_components_bounded(self, env, network):
        """Test that linf noise never exceeds epsilon in any component."""
        trajectory = rollout(network, env, seed=0, num_envs=16, adapter=uniform_noise_adapter(0.05))

        assert np.abs(trajectory.perturbations).max() <= 0.05 + 1e-12
        assert np.abs(trajectory.perturbations).max() > 0.03

    def test_l2_noise_inside_ball(self, env, network):
        """Test that l2 noise lies in the l2 ball."""
        trajectory = rollout(network, env, seed=0, num_envs=16, adapter=uniform_noise_adapter(0.05, Norm.L2))

        assert np.linalg.norm(trajectory.perturbations, axis=1).max() <= 0.05 + 1e-12

    def test_same_seed_same_noise(self, env, network):
        """Test that the noise sequence is reproducible."""
        first = rollout(network, env, seed=0, num_envs=4, adapter=uniform_noise_adapter(0.1, seed=5))
        second = rollout(network, env, seed=0, num_envs=4, adapter=uniform_noise_adapter(0.1, seed=5))
        other = rollout(network, env, seed=0, num_envs=4, adapter=uniform_noise_adapter(0.1, seed=6))

        np.testing.assert_array_equal(first.perturbations, second.perturbations)
        assert not np.allclose(first.perturbations, other.perturbations)

    def test_columns_independent_of_batch_size(self, env, network):
        """Test that column 0 sees the same noise in batches of 1 and 4."""
        single = rollout(network, env, seed=0, num_envs=1, adapter=uniform_noise_adapter(0.1, seed=5))
        batch = rollout(network, env, seed=0, num_envs=4, adapter=uniform_noise_adapter(0.1, seed=5))

        np.testing.assert_allclose(single.perturbations[:, :, 0], batch.perturbations[:, :, 0], atol=1e-12)


class TestPGDAdapter:
    """Test cases for per-step PGD inside rollouts."""

    @pytest.mark.parametrize("norm", [Norm.L2, Norm.LINF])
    def test_perturbations_feasible(self, env, network, norm):
        """Test that every applied perturbation respects the budget."""
        adapter = PGDAdapter(network, 0.1, norm, steps=10)

        trajectory = rollout(network, env, seed=0, num_envs=3, adapter=adapter)

        for v in trajectory.perturbations:
            assert np.all(norm.of(v) <= 0.1 + 1e-9)
        assert len(adapter.deviations) == env.horizon

    def test_sandwich_deviation_bounded(self, env):
        """Test that per-step deviations of a gamma = 2 policy stay below 2 eps."""
        policy = build_policy("sandwich", widths=(8, 8), gamma=2.0, seed=0)
        adapter = PGDAdapter(policy, 0.11, Norm.L2, steps=10)

        rollout(policy, env, seed=0, num_envs=3, adapter=adapter)

        assert max(d.max() for d in adapter.deviations) <= 2.0 * 0.11 + 1e-6


class TestFixedSequenceAdapter:
    """Test cases for precomputed sequences."""

    def test_sequence_is_added(self, env, network):
        """Test that the stored sequence is what the policy sees on top of the state."""
        sequence = np.full((env.horizon, 2, 2), 0.01)

        trajectory = rollout(network, env, seed=0, num_envs=2, adapter=FixedSequenceAdapter(sequence))

        np.testing.assert_allclose(trajectory.perturbations, sequence, atol=1e-12)

    def test_length_mismatch_rejected(self, env, network):
        """Test that a sequence of the wrong length is rejected at reset."""
        adapter = FixedSequenceAdapter(np.zeros((env.horizon - 1, 2, 1)))

        with pytest.raises(ValueError, match="does not match the horizon"):
            rollout(network, env, seed=0, adapter=adapter)

    def test_rank_checked(self):
        """Test that the sequence must be three-dimensional."""
        with pytest.raises(ValueError, match="obs_dim"):
            FixedSequenceAdapter(np.zeros((5, 2)))


class TestMakeAdapter:
    """Test cases for make_adapter."""

    def test_kinds(self, network):
        """Test the adapter chosen for each rollout-level kind."""
        assert make_adapter(AttackSpec(kind="none"), network) is NO_PERTURBATION
        assert make_adapter(AttackSpec(kind="delay", delay=2), network).delay == 2
        assert make_adapter(AttackSpec(kind="uniform_noise", norm="linf"), network).kind == "uniform_noise"
        assert isinstance(make_adapter(AttackSpec(kind=AttackKind.PGD_STEP), network), PGDAdapter)

    def test_trajectory_has_no_adapter(self, network):
        """Test that trajectory attacks are not rollout adapters."""
        with pytest.raises(ValueError, match="no rollout adapter"):
            make_adapter(AttackSpec(kind="trajectory"), network)
