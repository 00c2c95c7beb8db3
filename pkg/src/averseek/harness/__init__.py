"""Scenario configuration, execution and command-line plumbing."""

from .config import ConfigError, ProbeConfig, ScenarioConfig, load_config, load_probe_config, parse_config
from .scenarios import reproduce_figure, run_scenario, simulate, sweep

__all__ = [
    "ConfigError",
    "ProbeConfig",
    "ScenarioConfig",
    "load_config",
    "load_probe_config",
    "parse_config",
    "reproduce_figure",
    "run_scenario",
    "simulate",
    "sweep",
]
