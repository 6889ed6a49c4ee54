#!/usr/bin/env python3
"""
Checkpoints

JSON documents holding a policy network's free parameters plus training state.
Derived weights are never written; they are recomputed on load.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from autodiff.tensor import Tensor, as_tensor
from layers.policy_network import PolicyNetwork
from logger.log_wrapper import get_logger

logger = get_logger("layers:checkpoint", __name__)


@dataclass
class Checkpoint:
    """
    Saved policy plus auxiliary training state.

    Attributes:
        network: Policy mean network
        seed: Seed the network was initialized and trained with
        metadata: Free-form training metadata (update index, rewards, config)
        tensors: Extra named tensors (e.g. Gaussian log-std)
        value_network: Optional critic saved alongside the policy
    """
    network: PolicyNetwork
    seed: int
    metadata: Dict[str, Any] = field(default_factory=dict)
    tensors: Dict[str, Tensor] = field(default_factory=dict)
    value_network: Optional[PolicyNetwork] = None

    def to_dict(self) -> Dict[str, Any]:
        document = self.network.to_dict()
        document["seed"] = self.seed
        document["metadata"] = self.metadata
        document["tensors"] = {name: np.asarray(value).tolist() for name, value in self.tensors.items()}
        if self.value_network is not None:
            document["value_network"] = self.value_network.to_dict()
        return document

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> 'Checkpoint':
        value_document = document.get("value_network")
        return cls(
            network=PolicyNetwork.from_dict(document),
            seed=int(document.get("seed", 0)),
            metadata=dict(document.get("metadata", {})),
            tensors={name: as_tensor(value) for name, value in document.get("tensors", {}).items()},
            value_network=PolicyNetwork.from_dict(value_document) if value_document else None,
        )


def save_checkpoint(path: str, checkpoint: Checkpoint) -> str:
    """Write `checkpoint` as JSON, creating parent directories."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    temp_path = f"{path}.tmp"
    with open(temp_path, 'w') as f:
        json.dump(checkpoint.to_dict(), f, indent=2)
    os.replace(temp_path, path)
    logger.debug(f"Saved checkpoint to: {path}")
    return path


def load_checkpoint(path: str) -> Checkpoint:
    """Read a checkpoint written by `save_checkpoint`."""
    with open(path, 'r') as f:
        document = json.load(f)
    return Checkpoint.from_dict(document)
