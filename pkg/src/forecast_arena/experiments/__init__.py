"""Experiment harness: config parsing, runners, CSV/plot output, CLI."""

from .config import (
    ConfigError,
    ExperimentConfig,
    InfeasibleScaleError,
    auto_learning_rate,
    build_distribution,
    default_config,
    event_complexity,
    load_config_file,
    parse_config,
)
from .runners import (
    RunResult,
    run_chain_check,
    run_complexity,
    run_concentration,
    run_experiment,
    run_selection,
    run_tightness,
    run_truthfulness,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InfeasibleScaleError",
    "RunResult",
    "auto_learning_rate",
    "build_distribution",
    "default_config",
    "event_complexity",
    "load_config_file",
    "parse_config",
    "run_chain_check",
    "run_complexity",
    "run_concentration",
    "run_experiment",
    "run_selection",
    "run_tightness",
    "run_truthfulness",
]
