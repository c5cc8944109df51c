"""Scenario configuration, study pipelines and the ``dstt-kit`` CLI."""

from .config import ConfigError, ScenarioConfig
from .studies import (
    ExperimentResult,
    Scenario,
    run_bound_validation,
    run_covariance_study,
    run_frobenius_study,
)
from .cli import run_scenario

__all__ = [
    "ConfigError",
    "ExperimentResult",
    "Scenario",
    "ScenarioConfig",
    "run_bound_validation",
    "run_covariance_study",
    "run_frobenius_study",
    "run_scenario",
]
