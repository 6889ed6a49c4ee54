#!/usr/bin/env python3
"""
Layers Package

Plain and Lipschitz-bounded layers, policy network assembly and checkpoints.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .linear import AOLLinear, CayleyLinear, Layer, OrthogonalLinear, PlainLinear, SNLinear
from .policy_network import Architecture, PolicyNetwork, build_policy, certified_upper_bound, default_widths
from .sandwich import SandwichLayer, sandwich_forward, sandwich_map
from .weights import make_aol_weight, make_cayley_weight, make_semi_orthogonal, make_sn_weight

__all__ = [
    'AOLLinear',
    'Architecture',
    'CayleyLinear',
    'Checkpoint',
    'Layer',
    'OrthogonalLinear',
    'PlainLinear',
    'PolicyNetwork',
    'SNLinear',
    'SandwichLayer',
    'build_policy',
    'certified_upper_bound',
    'default_widths',
    'load_checkpoint',
    'make_aol_weight',
    'make_cayley_weight',
    'make_semi_orthogonal',
    'make_sn_weight',
    'sandwich_forward',
    'sandwich_map',
    'save_checkpoint',
]
