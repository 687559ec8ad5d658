"""Experiment orchestration: config, pipeline, reports, CLI."""

from .config import ConfigError, ExperimentConfig, Thresholds, load_config, parse_config
from .pipeline import fit_order, pairwise_orders, run_experiment
from .report import CheckRecord, ConvergenceTable, Report, emit_report, report_to_json

__all__ = [
    "CheckRecord",
    "ConfigError",
    "ConvergenceTable",
    "ExperimentConfig",
    "Report",
    "Thresholds",
    "emit_report",
    "fit_order",
    "load_config",
    "pairwise_orders",
    "parse_config",
    "report_to_json",
    "run_experiment",
]
