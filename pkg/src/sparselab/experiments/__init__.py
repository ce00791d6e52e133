"""Experiment configuration, orchestration and report emission."""

from .config import KINDS, ExperimentConfig, load_config
from .report import report_json, rows_csv, write_report
from .runner import PIPELINES, ExperimentReport, run_experiment

__all__ = [
    "KINDS",
    "PIPELINES",
    "ExperimentConfig",
    "ExperimentReport",
    "load_config",
    "report_json",
    "rows_csv",
    "run_experiment",
    "write_report",
]
