#!/usr/bin/env python3
"""
LipRL - Main Entry Point

Command-line harness for training Lipschitz-constrained and unconstrained
policies, attacking and certifying them, and running full (architecture,
gamma, seed) sweeps with their reports.

Exit codes: 0 success, 2 invalid input (bad config, missing file), 3 numeric
failure during training, estimation or attack.
"""

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime
from typing import List, Optional

from dotenv import load_dotenv  # type: ignore

from analysis.report_builder import make_reports
from attacks.attack_runner import run_attack
from autodiff.errors import NumericFailure
from configuration import DEFAULT_RUNS_DIR
from estimation.lipschitz_estimator import empirical_lower_bound, local_lipschitz_grid
from experiments.experiment_config import (
    AttackSettings,
    ExperimentConfig,
    LipschitzSettings,
    TrainSettings,
    load_config,
)
from experiments.experiment_runner import (
    LIPSCHITZ_FILENAME,
    LOCAL_GRID_FILENAME,
    default_run_dir,
    run_experiment,
)
from layers.checkpoint import load_checkpoint
from logger.log_wrapper import get_logger
from logger.logging_config import setup_logging
from ppo.trainer import train

load_dotenv(override=True)

logger = get_logger("main", __name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
SETTINGS_FILENAME = "settings.json"


def _run_dir(out: Optional[str], command: str) -> str:
    if out:
        return out
    root = os.getenv("LIPRL_RUNS_DIR", DEFAULT_RUNS_DIR)
    return os.path.join(root, f"{command}_{datetime.now().strftime('%Y%m%d-%H%M%S')}")


def _write_settings(out: str, document: dict) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, SETTINGS_FILENAME), 'w') as f:
        json.dump(document, f, indent=2, default=str)


def _checkpoint_path(args: argparse.Namespace, configured: Optional[str]) -> str:
    path = args.checkpoint or configured
    if not path:
        raise ValueError(f"{args.command} needs a checkpoint (--checkpoint or 'checkpoint' in the config)")
    return path


def command_train(args: argparse.Namespace) -> int:
    settings = load_config(args.config, TrainSettings)
    ppo = settings.ppo_config(args.seed)
    out = _run_dir(args.out, "train")
    setup_logging(out, args.verbose)
    _write_settings(out, {**dataclasses.asdict(settings), "ppo": ppo.to_dict()})
    logger.info(f"Training {settings.architecture} (gamma={settings.gamma}) on {settings.task}, seed {ppo.seed}")

    result = train(settings.environment(), settings.architecture, ppo, gamma=settings.gamma,
                   widths=settings.widths, run_dir=out, keep_checkpoints=settings.keep_checkpoints)
    logger.info(f"Final evaluation: reward {result.final_eval.mean_reward:.2f} "
                f"+/- {result.final_eval.std_reward:.2f}, "
                f"stabilized {result.final_eval.stabilized_fraction:.0%}; outputs in {out}")
    return EXIT_OK


def command_attack(args: argparse.Namespace) -> int:
    overrides = {} if args.seed is None else {"eval_seed": args.seed}
    settings = load_config(args.config, AttackSettings, overrides)
    checkpoint = load_checkpoint(_checkpoint_path(args, settings.checkpoint))
    out = _run_dir(args.out, "attack")
    setup_logging(out, args.verbose)
    _write_settings(out, {**dataclasses.asdict(settings), "attack": settings.attack.to_dict()})

    result = run_attack(checkpoint.network, settings.environment(), settings.attack,
                        episodes=settings.episodes, seed=settings.eval_seed)
    path = result.save(out)
    logger.info(f"{settings.attack.label} at {settings.attack.budget:g}: reward {result.attacked_return:.2f} "
                f"(nominal {result.nominal_return:.2f}), max deviation {result.max_deviation:.4f}; "
                f"written to {path}")
    return EXIT_OK


def command_lipschitz(args: argparse.Namespace) -> int:
    overrides = {} if args.seed is None else {"seed": args.seed}
    settings = load_config(args.config, LipschitzSettings, overrides)
    network = load_checkpoint(_checkpoint_path(args, settings.checkpoint)).network
    out = _run_dir(args.out, "lipschitz")
    setup_logging(out, args.verbose)
    _write_settings(out, {**dataclasses.asdict(settings), "estimation": settings.estimation.to_dict()})

    estimation = settings.estimation
    estimate = empirical_lower_bound(network, domain=estimation.domain, epsilon=estimation.epsilon,
                                     restarts=estimation.restarts, iters=estimation.iters, step=estimation.step,
                                     seed=settings.seed)
    with open(os.path.join(out, LIPSCHITZ_FILENAME), 'w') as f:
        json.dump(estimate.to_dict(), f, indent=2)
    if settings.local_grid:
        local_lipschitz_grid(network, domain=estimation.domain, resolution=estimation.grid_resolution,
                             epsilon=estimation.epsilon, restarts=estimation.grid_restarts,
                             iters=estimation.iters, step=estimation.step,
                             seed=settings.seed).save(os.path.join(out, LOCAL_GRID_FILENAME))
    logger.info(f"Lower bound {estimate.lower_bound:.4f}, certified {estimate.certified_bound:.4f}, "
                f"tightness {estimate.tightness:.3f}")
    return EXIT_OK


def command_sweep(args: argparse.Namespace) -> int:
    overrides = {} if args.seed is None else {"seed": args.seed}
    config = load_config(args.config, ExperimentConfig, overrides)
    out = args.out or config.output_dir or default_run_dir(config)
    setup_logging(out, args.verbose)

    run = run_experiment(config, out, workers=args.workers, resume=not args.fresh)
    report = make_reports(run.run_dir, render=not args.no_plots)
    logger.info(f"Sweep finished: {len(run.completed)} trained, {len(run.resumed)} resumed; "
                f"report in {report.directory}")
    return EXIT_OK


def command_report(args: argparse.Namespace) -> int:
    if not args.out:
        raise ValueError("report needs --out <experiment directory>")
    setup_logging(args.out, args.verbose)
    report = make_reports(args.out, render=not args.no_plots)
    logger.info(f"Report with {len(report.summary)} rows written to {report.directory}")
    return EXIT_OK


COMMANDS = {
    "train": command_train,
    "attack": command_attack,
    "lipschitz": command_lipschitz,
    "sweep": command_sweep,
    "report": command_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="LipRL - Lipschitz-constrained policies and their robustness",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py train --config train.json --out runs/sandwich_g4 --seed 3
  python main.py attack --config delay.json --checkpoint runs/sandwich_g4/policy.json
  python main.py lipschitz --checkpoint runs/sandwich_g4/policy.json --out runs/lip
  python main.py sweep --config sweep.json --out runs/sweep --workers 4
  python main.py report --out runs/sweep
        """
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", type=str, default=None, help="JSON settings file (defaults when omitted)")
        sub.add_argument("--out", type=str, default=None, help="Output directory")
        sub.add_argument("--seed", type=int, default=None, help="Seed override")
        sub.add_argument("--verbose", action="store_true", default=False, help="DEBUG output on the console")
        if name in ("attack", "lipschitz"):
            sub.add_argument("--checkpoint", type=str, default=None, help="policy.json to load")
        if name == "sweep":
            sub.add_argument("--workers", type=int, default=None, help="Worker processes (LIPRL_WORKERS)")
            sub.add_argument("--fresh", action="store_true", default=False,
                             help="Ignore the manifest and re-run every cell")
        if name in ("sweep", "report"):
            sub.add_argument("--no-plots", action="store_true", default=False, help="Skip SVG figures")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericFailure as e:
        logger.exception(f"Numeric failure in {args.command}: {type(e).__name__}: {e}")
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError, KeyError) as e:
        logger.exception(f"Invalid input for {args.command}: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
