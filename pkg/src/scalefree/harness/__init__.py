"""Scenario runner, bound tables, scale-invariance checks and the acceptance suite."""
from .config import ConfigError, ScenarioConfig, load_config
from .runner import RunReport, bound_report, check_scale_invariance, run_scenario

__all__ = [
    "ConfigError", "ScenarioConfig", "load_config", "RunReport", "bound_report",
    "check_scale_invariance", "run_scenario",
]
