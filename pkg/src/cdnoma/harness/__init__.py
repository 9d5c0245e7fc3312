"""Experiment orchestration: Monte Carlo engine, presets, runner and CLI."""

from .experiment import ExperimentSpec, resolve, run_experiment, validate
from .presets import get_preset, preset_catalog

__all__ = ["ExperimentSpec", "resolve", "run_experiment", "validate", "get_preset",
           "preset_catalog"]
