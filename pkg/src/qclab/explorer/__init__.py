"""Scenario runner: experiment configs, experiments, CSV reports and the CLI."""

from .config import ConfigError, ExperimentConfig
from .experiments import (
    EXPERIMENTS,
    ExperimentError,
    run_cover,
    run_estimate,
    run_fact_check,
    run_global_form,
    run_jl,
    run_l1_compare,
    run_projection_containment,
    run_section_diameter,
)
from .report import SCHEMA_VERSION, ExperimentReport

__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentError", "ExperimentReport", "EXPERIMENTS",
    "SCHEMA_VERSION", "run_cover", "run_estimate", "run_fact_check", "run_global_form", "run_jl",
    "run_l1_compare", "run_projection_containment", "run_section_diameter",
]
