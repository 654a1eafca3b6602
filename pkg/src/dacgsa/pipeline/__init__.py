"""Batch experiments: configuration, persistence, analysis and the CLI."""

from .analysis import (
    GIGATON,
    QOI_GROUPS,
    AnalysisError,
    analyze,
    binned_means,
    emit_plot_data,
    exceedance_probability,
    load_run_table,
    minimum_subsidy,
    quantile_summary,
)
from .config import OUTPUT_ROOT_ENV, ConfigError, ExperimentConfig
from .runner import QOI_COLUMNS, RunSummary, evaluate, make_layout, read_runs, read_samples, run_experiment

__all__ = [
    "AnalysisError",
    "ConfigError",
    "ExperimentConfig",
    "GIGATON",
    "OUTPUT_ROOT_ENV",
    "QOI_COLUMNS",
    "QOI_GROUPS",
    "RunSummary",
    "analyze",
    "binned_means",
    "emit_plot_data",
    "evaluate",
    "exceedance_probability",
    "load_run_table",
    "make_layout",
    "minimum_subsidy",
    "quantile_summary",
    "read_runs",
    "read_samples",
    "run_experiment",
]
