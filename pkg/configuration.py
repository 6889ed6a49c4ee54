#!/usr/bin/env python3
"""
Configuration variables for the LipRL laboratory.

Every default used by the packages lives here; run-time JSON configs override them.
"""

import math

# Numerical core
SOLVE_CONDITION_LIMIT = 1e12  # Largest tolerated condition number for a linear solve
POWER_ITERATION_TOL = 1e-9  # Relative tolerance of spectral-norm power iteration
POWER_ITERATION_MAX_ITERS = 1000  # Iteration cap for power iteration
GRAD_CHECK_STEP = 1e-5  # Central finite-difference step
GRAD_CHECK_FLOOR = 1e-8  # Absolute floor for near-zero gradient components

# Pendulum physics (alpha = 0 is upright)
PENDULUM_MASS = 0.25  # kg
PENDULUM_LENGTH = 0.5  # m
PENDULUM_GRAVITY = 9.81  # m/s^2
PENDULUM_DAMPING = 0.01  # N.m.s
PENDULUM_DT = 0.05  # s; two samples = 0.1 s delay
PENDULUM_TORQUE_LIMIT = 1.0  # N.m
PENDULUM_HORIZON = 200  # steps (10 s)
PENDULUM_NOISE_SCALE = 0.0  # N.m, process torque noise
PENDULUM_INIT_VELOCITY = 1.0  # alpha_dot ~ U(-1, 1) rad/s at reset
STABILIZED_ANGLE = 0.2  # rad, success band over the final window
STABILIZED_WINDOW_SECONDS = 2.0  # s, final window checked for success

# Double integrator (PPO oracle)
DOUBLE_INTEGRATOR_DT = 0.1  # s
DOUBLE_INTEGRATOR_POSITION_COST = 1.0
DOUBLE_INTEGRATOR_VELOCITY_COST = 0.1
DOUBLE_INTEGRATOR_CONTROL_COST = 0.01
DOUBLE_INTEGRATOR_HORIZON = 50  # steps
DOUBLE_INTEGRATOR_INIT_RANGE = 1.0  # initial position/velocity ~ U(-1, 1)
RICCATI_TOL = 1e-12  # Fixed-point tolerance of the Riccati iteration
RICCATI_MAX_ITERS = 100000

# Policy networks
DEFAULT_ACTIVATION = "tanh"
PLAIN_HIDDEN_WIDTHS = (32, 32, 32, 32)  # 4 hidden layers of 32
SANDWICH_HIDDEN_WIDTHS = (21, 21, 21, 21)  # 4 Sandwich layers of 21
VALUE_HIDDEN_WIDTHS = (64, 64, 64, 64)
INITIAL_LOG_STD = -0.5

# PPO
PPO_NUM_ENVS = 64
PPO_ROLLOUT_LENGTH = 200
PPO_TOTAL_STEPS = 2_000_000
PPO_DISCOUNT = 0.99
PPO_GAE_LAMBDA = 0.95
PPO_CLIP_RANGE = 0.2
PPO_EPOCHS = 4
PPO_MINIBATCH_SIZE = 1024
PPO_POLICY_LR = 3e-4
PPO_VALUE_LR = 3e-4
PPO_ENTROPY_COEF = 0.0
PPO_VALUE_COEF = 0.5
PPO_MAX_GRAD_NORM = 0.5
PPO_EVAL_EPISODES = 128
PPO_EVAL_INTERVAL = 10  # updates between deterministic evaluations
EVAL_SEED = 10_000  # seed of the shared evaluation initial states
PPO_CHECKPOINT_INTERVAL = 25  # updates between checkpoints
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Lipschitz estimation
PENDULUM_DOMAIN = ((-math.pi, math.pi), (-8.0, 8.0))  # (alpha, alpha_dot) box
ESTIMATION_EPSILON = 0.1
ESTIMATION_RESTARTS = 20
ESTIMATION_ITERS = 500
ESTIMATION_STEP = 0.01  # decays 10x at iters/2
ESTIMATION_MIN_PERTURBATION = 1e-6
LOCAL_GRID_RESOLUTION = 21
LOCAL_GRID_RESTARTS = 4
ESTIMATION_CHUNK_COLUMNS = 4096  # columns evaluated per graph

# Attacks
ATTACK_EPSILON = 0.11
PGD_STEPS = 50
PGD_STEP_FACTOR = 2.5  # step size = factor * eps / steps
TRAJECTORY_WINDOWS = 4
TRAJECTORY_WINDOW_LENGTH = 50
TRAJECTORY_ITERS = 200
TRAJECTORY_STEP_FACTOR = 0.02  # step size = factor * eps
FEASIBILITY_TOL = 1e-9

# Experiment harness
GAMMA_SWEEP = (3.0, 4.0, 6.0, 8.0, 12.0, 16.0)
DELAY_GRID = tuple(range(0, 9))  # samples
ATTACK_EPSILON_GRID = (0.01, 0.02, 0.05, 0.08, 0.11, 0.15, 0.2, 0.3, 0.5)
FAILURE_THRESHOLD = -400.0  # mean undiscounted episode reward
CONTOUR_RESOLUTION = 101
NUM_SEEDS = 10
DEFAULT_RUNS_DIR = "../LipRL_runs"
DEFAULT_WORKERS = 1
