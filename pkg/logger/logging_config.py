#!/usr/bin/env python3
"""
Logging Configuration Module

This module provides structured logging configuration for training, attack and sweep runs.
"""

import logging
import os
import sys

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(run_dir: str, verbose: bool = False) -> str:
    """
    Set up structured logging for a run.

    Args:
        run_dir: Directory for the current run
        verbose: Emit DEBUG records on the console as well

    Returns:
        str: Path to the log file
    """
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)

    # Repeated calls (tests, sweeps) must not stack handlers
    for handler in list(root.handlers):
        if getattr(handler, "_liprl_handler", False):
            root.removeHandler(handler)
            handler.close()

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    console_handler._liprl_handler = True  # type: ignore[attr-defined]
    root.addHandler(console_handler)

    log_dir = os.path.join(run_dir, "logs")
    os.makedirs(log_dir, exist_ok=True)

    log_filename = os.path.join(log_dir, "liprl_run.log")

    # File handler keeps the per-iteration detail
    file_handler = logging.FileHandler(log_filename)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    file_handler._liprl_handler = True  # type: ignore[attr-defined]
    root.addHandler(file_handler)

    return log_filename
