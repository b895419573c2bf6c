"""Experiment CLI, presets and Monte Carlo orchestration."""

from .config import ExperimentSpec, spec_from_mapping
from .experiment import run_experiment, run_trials
from .scenarios import run_scenario, scenario_presets
