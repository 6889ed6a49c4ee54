#!/usr/bin/env python3
"""
Estimation Package

Empirical Lipschitz lower bounds and local Lipschitz maps.
"""

from .lipschitz_estimator import (
    EstimationSettings,
    LipEstimate,
    LocalLipschitzGrid,
    empirical_lower_bound,
    local_lipschitz_grid,
    policy_function,
    project_ball,
)

__all__ = [
    'EstimationSettings',
    'LipEstimate',
    'LocalLipschitzGrid',
    'empirical_lower_bound',
    'local_lipschitz_grid',
    'policy_function',
    'project_ball',
]
