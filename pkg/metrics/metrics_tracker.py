#!/usr/bin/env python3
"""
Metrics Tracking Module

Tracks training metrics per PPO update and streams them as JSON lines:
- Environment step and update index
- Mean rollout reward
- Loss components and gradient norms
- Periodic deterministic evaluation results
- Wall time since the start of the run
"""

import json
import os
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

from logger.log_wrapper import get_logger

logger = get_logger("metrics:tracker", __name__)

METRICS_FILENAME = "metrics.jsonl"
# fields that differ between otherwise identical runs
NONDETERMINISTIC_FIELDS = ("wall_time",)


@dataclass
class UpdateMetrics:
    """Metrics of a single PPO update."""
    update: int
    step: int
    mean_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    grad_norm: float
    value_grad_norm: float
    wall_time: float = 0.0
    eval_reward: Optional[float] = None
    eval_stabilized: Optional[float] = None


@dataclass
class RunSummary:
    """Summary of a complete training run."""
    timestamp: str
    updates: int = 0
    steps: int = 0
    final_eval_reward: Optional[float] = None
    best_eval_reward: Optional[float] = None
    success: bool = False
    error_message: Optional[str] = None
    execution_time_seconds: Optional[float] = None


class MetricsTracker:
    """Collects per-update metrics and appends them to a JSON-lines stream."""

    def __init__(self, run_dir: str, filename: str = METRICS_FILENAME,
                 clock: Callable[[], float] = time.perf_counter):
        self.run_dir = run_dir
        self.path = os.path.join(run_dir, filename)
        self.records: List[UpdateMetrics] = []
        self.summary = RunSummary(timestamp=datetime.now().isoformat())
        self._clock = clock
        self.start_time: Optional[float] = None

    def start_run(self, description: str = "") -> None:
        """Start a fresh stream (truncating any previous one)."""
        os.makedirs(self.run_dir, exist_ok=True)
        with open(self.path, 'w'):
            pass
        self.start_time = self._clock()
        logger.info(f"Started metrics tracking{': ' + description if description else ''}")

    def elapsed(self) -> float:
        return 0.0 if self.start_time is None else self._clock() - self.start_time

    def record_update(self, metrics: UpdateMetrics) -> None:
        """Append one update record to memory and to the stream."""
        metrics.wall_time = self.elapsed()
        self.records.append(metrics)
        self.summary.updates = metrics.update + 1
        self.summary.steps = metrics.step
        if metrics.eval_reward is not None:
            self.summary.final_eval_reward = metrics.eval_reward
            best = self.summary.best_eval_reward
            self.summary.best_eval_reward = metrics.eval_reward if best is None else max(best, metrics.eval_reward)
        with open(self.path, 'a') as f:
            f.write(json.dumps(asdict(metrics)) + "\n")
        logger.debug(f"Recorded update {metrics.update} (step {metrics.step}, reward {metrics.mean_reward:.3f})")

    def complete_run(self, success: bool, error_message: Optional[str] = None) -> None:
        """Complete the run and compute the final summary."""
        self.summary.execution_time_seconds = self.elapsed()
        self.summary.success = success
        self.summary.error_message = error_message
        logger.info(f"Completed metrics tracking - Success: {success}, Updates: {self.summary.updates}, "
                    f"Final eval reward: {self.summary.final_eval_reward}")

    def save_summary(self, filename: str = "summary.json") -> str:
        """Save the run summary to JSON."""
        filepath = os.path.join(self.run_dir, filename)
        with open(filepath, 'w') as f:
            json.dump(asdict(self.summary), f, indent=2)
        logger.info(f"Saved metrics summary to: {filepath}")
        return filepath

    def get_summary(self) -> Dict[str, Any]:
        return asdict(self.summary)


def load_metrics(path: str) -> List[Dict[str, Any]]:
    """Read a JSON-lines metrics stream."""
    with open(path, 'r') as f:
        return [json.loads(line) for line in f if line.strip()]


def deterministic_view(records: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Records without timing fields, for comparing runs."""
    return [{k: v for k, v in record.items() if k not in NONDETERMINISTIC_FIELDS} for record in records]
