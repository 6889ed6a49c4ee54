#!/usr/bin/env python3
"""
Experiment Runner

Trains every (architecture, gamma, seed) cell of an ExperimentConfig, evaluates
each trained policy nominally and under every attack sweep, estimates its
Lipschitz lower bound, and computes the smallest failing budget of every
(architecture, gamma) group. A manifest at the artifact root records finished
cells with the hash of their settings and files, so an interrupted sweep
resumes where it stopped and a corrupted cell is trained again.
"""

import hashlib
import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from attacks.attack_runner import run_attack
from attacks.attack_spec import AttackKind, AttackSpec
from configuration import DEFAULT_RUNS_DIR, DEFAULT_WORKERS
from estimation.lipschitz_estimator import empirical_lower_bound, local_lipschitz_grid
from experiments.experiment_config import Cell, ExperimentConfig
from experiments.robustness import FailingEpsilon, smallest_failing_epsilon
from layers.checkpoint import load_checkpoint
from layers.policy_network import PolicyNetwork
from logger.log_wrapper import get_logger
from ppo.trainer import FINAL_CHECKPOINT, train

logger = get_logger("experiments:runner", __name__)

CONFIG_FILENAME = "config.json"
MANIFEST_FILENAME = "manifest.json"
CELLS_CSV = "cells.csv"
FAILING_EPSILON_FILENAME = "failing_epsilon.json"
CELLS_DIR = "cells"
ROBUSTNESS_DIR = "robustness"
CELL_FILENAME = "cell.json"
EVALUATIONS_FILENAME = "evaluations.csv"
LIPSCHITZ_FILENAME = "lipschitz.json"
LOCAL_GRID_FILENAME = "local_lipschitz.csv"
ATTACKS_DIR = "attacks"
# files whose hash marks a cell as intact
HASHED_FILES = (CELL_FILENAME, FINAL_CHECKPOINT, EVALUATIONS_FILENAME)
NOMINAL_LABEL = "none"


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def stable_hash(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def files_hash(directory: str, names: Sequence[str] = HASHED_FILES) -> Optional[str]:
    """sha256 over the named files, None if one is missing."""
    digest = hashlib.sha256()
    for name in names:
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            return None
        digest.update(name.encode("utf-8"))
        with open(path, 'rb') as f:
            digest.update(f.read())
    return digest.hexdigest()


def worker_count(requested: Optional[int] = None) -> int:
    """Explicit count, else LIPRL_WORKERS, else the default."""
    workers = requested if requested is not None else int(os.getenv("LIPRL_WORKERS", DEFAULT_WORKERS))
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def cell_dir(run_dir: str, cell: Cell) -> str:
    return os.path.join(run_dir, CELLS_DIR, cell.cell_id)


def cell_settings_hash(config: ExperimentConfig, cell: Cell) -> str:
    """Hash of everything that determines a cell's artifacts."""
    document = config.to_dict()
    for key in ("name", "architectures", "gammas", "seed", "num_seeds", "seeds", "failure_threshold",
                "contour_resolution", "output_dir"):
        document.pop(key)
    document["cell"] = cell.to_dict()
    return stable_hash(document)


def _write_json(path: str, document: Any) -> str:
    temp_path = f"{path}.tmp"
    with open(temp_path, 'w') as f:
        json.dump(document, f, indent=2)
    os.replace(temp_path, path)
    return path


# --- single cell -------------------------------------------------------------------


def evaluation_rows(label: str, budget: float, rewards: np.ndarray) -> List[Dict[str, Any]]:
    return [{"attack": label, "budget": budget, "episode": i, "reward": float(r)} for i, r in enumerate(rewards)]


def reward_std(rewards: np.ndarray) -> float:
    """Sample std of episode rewards, 0 for a single episode."""
    return float(np.std(rewards, ddof=1)) if rewards.size > 1 else 0.0


def evaluate_cell(network: PolicyNetwork, config: ExperimentConfig, directory: str) -> Dict[str, Any]:
    """
    Nominal and attacked evaluations of one policy from the shared evaluation states.

    Writes evaluations.csv (one row per episode) and the attack records under attacks/.

    Returns:
        {"nominal": {...}, "attacks": {label: [per-budget records]}}
    """
    env = config.environment()
    attacks_dir = os.path.join(directory, ATTACKS_DIR)
    nominal = run_attack(network, env, AttackSpec(kind=AttackKind.NONE), episodes=config.eval_episodes,
                         seed=config.eval_seed)
    nominal.save(attacks_dir, "nominal")
    rows = evaluation_rows(NOMINAL_LABEL, 0.0, nominal.attacked_rewards)
    records: Dict[str, List[Dict[str, Any]]] = {}

    for sweep in config.attacks:
        records[sweep.label] = []
        for spec in sweep.specs():
            result = run_attack(network, env, spec, episodes=config.eval_episodes, seed=config.eval_seed)
            result.save(attacks_dir)
            rows.extend(evaluation_rows(sweep.label, spec.budget, result.attacked_rewards))
            records[sweep.label].append({
                "budget": spec.budget,
                "mean_reward": result.attacked_return,
                "std_reward": reward_std(result.attacked_rewards),
                "stabilized_fraction": result.stabilized_fraction,
                "max_deviation": result.max_deviation,
                "iterations": result.iterations,
            })
        logger.debug(f"{sweep.label}: {len(sweep.budgets)} budgets evaluated")

    pd.DataFrame(rows).to_csv(os.path.join(directory, EVALUATIONS_FILENAME), index=False)
    summary = {
        "mean_reward": nominal.attacked_return,
        "std_reward": reward_std(nominal.attacked_rewards),
        "stabilized_fraction": nominal.stabilized_fraction,
    }
    return {"nominal": summary, "attacks": records}


def run_cell(config: ExperimentConfig, cell: Cell, directory: str) -> Dict[str, Any]:
    """
    Train, estimate and evaluate one cell; cell.json is written last.

    Returns:
        The cell record
    """
    logger.info(f"Cell {cell.cell_id}: training")
    env = config.environment()
    result = train(env, cell.architecture, config.ppo_config(cell.seed), gamma=cell.gamma,
                   widths=config.widths_for(cell.architecture), run_dir=directory, keep_checkpoints=False)
    network = result.policy.network

    settings = config.estimation
    estimate = empirical_lower_bound(network, domain=settings.domain, epsilon=settings.epsilon,
                                     restarts=settings.restarts, iters=settings.iters, step=settings.step,
                                     seed=cell.seed)
    _write_json(os.path.join(directory, LIPSCHITZ_FILENAME), estimate.to_dict())
    if config.local_grid:
        local_lipschitz_grid(network, domain=settings.domain, resolution=settings.grid_resolution,
                             epsilon=settings.epsilon, restarts=settings.grid_restarts, iters=settings.iters,
                             step=settings.step, seed=cell.seed).save(os.path.join(directory, LOCAL_GRID_FILENAME))

    evaluation = evaluate_cell(network, config, directory)
    record = {
        **cell.to_dict(),
        "cell_id": cell.cell_id,
        "group": cell.group,
        "parameter_count": network.parameter_count(),
        "certified_bound": estimate.certified_bound,
        "lower_bound": estimate.lower_bound,
        "tightness": estimate.tightness,
        "final_eval": result.final_eval.to_dict(),
        **evaluation,
    }
    _write_json(os.path.join(directory, CELL_FILENAME), record)
    logger.info(f"Cell {cell.cell_id}: nominal reward {record['nominal']['mean_reward']:.2f}, "
                f"lower bound {estimate.lower_bound:.3f}")
    return record


def _cell_job(config_document: Dict[str, Any], cell_document: Dict[str, Any], directory: str) -> Dict[str, Any]:
    """Worker entry point; never raises so one cell cannot stop the sweep."""
    config = ExperimentConfig.from_dict(config_document)
    cell = Cell.from_dict(cell_document)
    try:
        run_cell(config, cell, directory)
    except Exception as e:
        logger.error(f"Cell {cell.cell_id} failed: {type(e).__name__}: {e}")
        return {"status": "failed", "error": f"{type(e).__name__}: {e}"}
    return {"status": "complete", "files_hash": files_hash(directory)}


# --- manifest ----------------------------------------------------------------------


def load_manifest(run_dir: str) -> Dict[str, Any]:
    path = os.path.join(run_dir, MANIFEST_FILENAME)
    if not os.path.exists(path):
        return {"cells": {}, "groups": {}}
    with open(path, 'r') as f:
        manifest = json.load(f)
    manifest.setdefault("cells", {})
    manifest.setdefault("groups", {})
    return manifest


def save_manifest(run_dir: str, manifest: Dict[str, Any]) -> str:
    manifest["updated"] = datetime.now().isoformat()
    return _write_json(os.path.join(run_dir, MANIFEST_FILENAME), manifest)


def is_complete(entry: Optional[Dict[str, Any]], directory: str, settings_hash: str) -> bool:
    """Whether a manifest entry marks an intact cell trained with the current settings."""
    if not entry or entry.get("status") != "complete":
        return False
    if entry.get("settings_hash") != settings_hash:
        logger.warning(f"Settings of {os.path.basename(directory)} changed; cell will be re-run")
        return False
    if files_hash(directory) != entry.get("files_hash"):
        logger.warning(f"Artifacts of {os.path.basename(directory)} do not match the manifest hash; "
                       f"cell will be re-run")
        return False
    return True


# --- group thresholds --------------------------------------------------------------


def load_evaluations(directory: str) -> pd.DataFrame:
    return pd.read_csv(os.path.join(directory, EVALUATIONS_FILENAME))


def group_failing_epsilons(config: ExperimentConfig, run_dir: str, cells: Sequence[Cell]) -> Dict[str, FailingEpsilon]:
    """
    Smallest failing budget of one (architecture, gamma) group for every attack sweep.

    Grid rewards come from the cells' evaluations; bisection midpoints are evaluated
    on every policy of the group and written to robustness/<group>.csv.
    """
    group = cells[0].group
    env = config.environment()
    directories = [cell_dir(run_dir, cell) for cell in cells]
    frame = pd.concat([load_evaluations(d).assign(cell_id=c.cell_id) for c, d in zip(cells, directories)],
                      ignore_index=True)
    networks = [load_checkpoint(os.path.join(d, FINAL_CHECKPOINT)).network for d in directories]
    extra_rows: List[Dict[str, Any]] = []
    results = {}

    for sweep in config.attacks:
        grid = frame[frame["attack"] == sweep.label].groupby("budget")["reward"].mean().to_dict()

        def mean_reward(budget: float, sweep=sweep, grid=grid) -> float:
            for known, value in grid.items():
                if np.isclose(known, budget, rtol=0.0, atol=1e-12):
                    return float(value)
            rewards = []
            for cell, network in zip(cells, networks):
                result = run_attack(network, env, sweep.spec.with_budget(budget), episodes=config.eval_episodes,
                                    seed=config.eval_seed)
                rows = evaluation_rows(sweep.label, budget, result.attacked_rewards)
                extra_rows.extend(dict(row, cell_id=cell.cell_id) for row in rows)
                rewards.append(result.attacked_rewards)
            return float(np.concatenate(rewards).mean())

        results[sweep.label] = smallest_failing_epsilon(mean_reward, sweep.budgets, config.failure_threshold,
                                                        integer=sweep.spec.kind is AttackKind.DELAY,
                                                        label=f"{group} {sweep.label}")

    robustness_dir = os.path.join(run_dir, ROBUSTNESS_DIR)
    os.makedirs(robustness_dir, exist_ok=True)
    columns = ["cell_id", "attack", "budget", "episode", "reward"]
    pd.DataFrame(extra_rows, columns=columns).to_csv(os.path.join(robustness_dir, f"{group}.csv"), index=False)
    return results


# --- sweep -------------------------------------------------------------------------


@dataclass
class ExperimentRun:
    """
    Outcome of run_experiment.

    Attributes:
        run_dir: Artifact directory
        completed: Cells trained in this call
        resumed: Cells skipped because the manifest marks them complete
        failed: Cell id -> error message
        failing_epsilon: Group -> attack label -> FailingEpsilon
    """
    run_dir: str
    completed: List[str] = field(default_factory=list)
    resumed: List[str] = field(default_factory=list)
    failed: Dict[str, str] = field(default_factory=dict)
    failing_epsilon: Dict[str, Dict[str, FailingEpsilon]] = field(default_factory=dict)


def default_run_dir(config: ExperimentConfig) -> str:
    root = os.getenv("LIPRL_RUNS_DIR", DEFAULT_RUNS_DIR)
    return os.path.join(root, f"{config.name}_{datetime.now().strftime('%Y%m%d-%H%M%S')}")


def write_cells_table(run_dir: str, cells: Sequence[Cell], manifest: Dict[str, Any]) -> str:
    """One row per complete cell: identity, bounds, parameter count and nominal reward."""
    rows = []
    for cell in cells:
        if manifest["cells"].get(cell.cell_id, {}).get("status") != "complete":
            continue
        with open(os.path.join(cell_dir(run_dir, cell), CELL_FILENAME), 'r') as f:
            record = json.load(f)
        rows.append({
            "cell_id": record["cell_id"],
            "group": record["group"],
            "architecture": record["architecture"],
            "gamma": record["gamma"],
            "seed": record["seed"],
            "parameter_count": record["parameter_count"],
            "certified_bound": record["certified_bound"],
            "lower_bound": record["lower_bound"],
            "tightness": record["tightness"],
            "nominal_reward": record["nominal"]["mean_reward"],
            "nominal_stabilized": record["nominal"]["stabilized_fraction"],
        })
    path = os.path.join(run_dir, CELLS_CSV)
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None, workers: Optional[int] = None,
                   resume: bool = True) -> ExperimentRun:
    """
    Run every cell of `config`, resuming from the manifest when present.

    Args:
        config: Sweep configuration
        out_dir: Artifact directory (config.output_dir, then a timestamped directory under LIPRL_RUNS_DIR)
        workers: Process pool size (LIPRL_WORKERS when omitted)
        resume: Skip cells the manifest marks complete and intact

    Returns:
        ExperimentRun
    """
    run_dir = out_dir or config.output_dir or default_run_dir(config)
    os.makedirs(os.path.join(run_dir, CELLS_DIR), exist_ok=True)
    _write_json(os.path.join(run_dir, CONFIG_FILENAME), config.to_dict())
    manifest = load_manifest(run_dir) if resume else {"cells": {}, "groups": {}}
    manifest["name"] = config.name
    manifest["config_hash"] = stable_hash(config.to_dict())
    run = ExperimentRun(run_dir=run_dir)

    cells = config.cells()
    pending = []
    for cell in cells:
        directory = cell_dir(run_dir, cell)
        settings_hash = cell_settings_hash(config, cell)
        if resume and is_complete(manifest["cells"].get(cell.cell_id), directory, settings_hash):
            run.resumed.append(cell.cell_id)
            continue
        if os.path.exists(directory):
            shutil.rmtree(directory)
        os.makedirs(directory)
        manifest["cells"][cell.cell_id] = {"cell": cell.to_dict(), "settings_hash": settings_hash,
                                           "status": "pending"}
        pending.append(cell)
    save_manifest(run_dir, manifest)
    logger.info(f"Experiment '{config.name}': {len(cells)} cells, {len(run.resumed)} already complete, "
                f"{len(pending)} to run in {run_dir}")

    def finish(cell: Cell, outcome: Dict[str, Any]) -> None:
        manifest["cells"][cell.cell_id].update(outcome)
        save_manifest(run_dir, manifest)
        if outcome["status"] == "complete":
            run.completed.append(cell.cell_id)
        else:
            run.failed[cell.cell_id] = outcome["error"]

    config_document = config.to_dict()
    pool_size = min(worker_count(workers), max(1, len(pending)))
    if pool_size == 1:
        for cell in pending:
            finish(cell, _cell_job(config_document, cell.to_dict(), cell_dir(run_dir, cell)))
    else:
        with ProcessPoolExecutor(max_workers=pool_size) as pool:
            futures = {pool.submit(_cell_job, config_document, cell.to_dict(), cell_dir(run_dir, cell)): cell
                       for cell in pending}
            for future in as_completed(futures):
                finish(futures[future], future.result())

    write_cells_table(run_dir, cells, manifest)
    run.failing_epsilon = _failing_epsilons(config, run_dir, cells, manifest)
    save_manifest(run_dir, manifest)
    if run.failed:
        logger.warning(f"{len(run.failed)} cell(s) failed: {', '.join(sorted(run.failed))}")
    logger.info(f"Experiment '{config.name}' finished: {len(run.completed)} trained, {len(run.resumed)} resumed")
    return run


def _failing_epsilons(config: ExperimentConfig, run_dir: str, cells: Sequence[Cell],
                      manifest: Dict[str, Any]) -> Dict[str, Dict[str, FailingEpsilon]]:
    """Thresholds of every group with complete cells; unchanged groups are read back from disk."""
    path = os.path.join(run_dir, FAILING_EPSILON_FILENAME)
    stored: Dict[str, Any] = {}
    if os.path.exists(path):
        with open(path, 'r') as f:
            stored = json.load(f)

    results: Dict[str, Dict[str, FailingEpsilon]] = {}
    documents: Dict[str, Any] = {}
    for group in config.groups():
        complete = [c for c in cells if c.group == group
                    and manifest["cells"].get(c.cell_id, {}).get("status") == "complete"]
        if not complete:
            logger.warning(f"Group {group} has no complete cells; skipping its thresholds")
            continue
        group_hash = stable_hash({
            "cells": [manifest["cells"][c.cell_id]["files_hash"] for c in complete],
            "threshold": config.failure_threshold,
            "attacks": [sweep.to_dict() for sweep in config.attacks],
        })
        entry = manifest["groups"].get(group, {})
        if entry.get("hash") == group_hash and group in stored:
            documents[group] = stored[group]
            results[group] = {label: _failing_from_dict(doc) for label, doc in stored[group].items()}
            continue
        results[group] = group_failing_epsilons(config, run_dir, complete)
        documents[group] = {label: result.to_dict() for label, result in results[group].items()}
        manifest["groups"][group] = {"hash": group_hash, "cells": [c.cell_id for c in complete]}

    _write_json(path, documents)
    return results


def _failing_from_dict(document: Dict[str, Any]) -> FailingEpsilon:
    epsilon = document["epsilon"]
    return FailingEpsilon(
        epsilon=None if epsilon == "none" else float(epsilon),
        grid_epsilon=document.get("grid_epsilon"),
        monotone=document.get("monotone", True),
        refined=document.get("refined", False),
        rewards={float(budget): reward for budget, reward in document.get("rewards", {}).items()},
    )
